//! Seeded synthetic data: a stand-in corpus of quantum-flavored Python test
//! files, and small separable point sets for sanity checks.
//!
//! Flaky files draw stochastic-execution snippets (shots, seeds, tolerance
//! asserts, retries) far more often than non-flaky ones, so the classes are
//! learnable but overlap.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng as _;

use crate::corpus::{write_manifest, Corpus, CorpusEntry, Label, ManifestRecord};
use crate::linalg::Matrix;
use crate::seed::{self, Rng};

const FLAKY_REPOS: [&str; 6] =
    ["qiskit", "qiskit-ibm-provider", "qiskit-ibmq-provider", "qiskit-ibm-runtime", "qiskit-nature", "netket"];

const HEADERS: [&str; 4] = [
    "# This code is part of Qiskit.\n#\n# (C) Copyright IBM 2023.\n\nimport unittest\nimport numpy as np\n\nfrom qiskit import QuantumCircuit, transpile\n",
    "\"\"\"Tests for the {name} module.\"\"\"\n\nimport pytest\nimport numpy as np\n\nfrom qiskit.circuit import Parameter\n",
    "import unittest\nfrom test import QiskitTestCase\n\nfrom qiskit.quantum_info import Operator, Statevector\n",
    "import jax\nimport jax.numpy as jnp\nimport netket as nk\nimport pytest\n",
];

const STOCHASTIC: [&str; 10] = [
    "        backend = Aer.get_backend(\"qasm_simulator\")\n        result = backend.run(qc, shots={n}).result()\n        counts = result.get_counts()\n        self.assertAlmostEqual(counts[\"00\"] / {n}, 0.5, delta=0.05)\n",
    "        np.random.seed({n})\n        values = np.random.rand({m})\n        self.assertTrue(np.allclose(values.mean(), 0.5, atol=0.1))\n",
    "        sampler = Sampler(options={{\"shots\": {n}}})\n        job = sampler.run(circuits)\n        quasi = job.result().quasi_dists[0]\n        self.assertAlmostEqual(quasi[0], 0.5, places=1)\n",
    "        for attempt in range({m}):\n            try:\n                job.wait_for_final_state(timeout={n})\n                break\n            except TimeoutError:\n                time.sleep(1)\n",
    "        ma = nk.models.RBM(alpha=1)\n        vs = nk.vqs.MCState(sampler, ma, n_samples={n}, seed=random.randint(0, 100))\n        energy = vs.expect(ha)\n        assert abs(energy.mean - exact) < 3 * energy.error_of_mean\n",
    "        transpiled = transpile(qc, backend, optimization_level={m}, seed_transpiler=None)\n        self.assertLessEqual(transpiled.depth(), {n})\n",
    "        estimator = Estimator(approximation=True, run_options={{\"shots\": {n}}})\n        value = estimator.run(qc, obs).result().values[0]\n        np.testing.assert_allclose(value, expected, rtol=0.1)\n",
    "        noise_model = NoiseModel.from_backend(fake_backend)\n        result = execute(qc, simulator, noise_model=noise_model, shots={n}).result()\n        self.assertGreater(result.get_counts().get(\"11\", 0), {m})\n",
    "        random_state = random_statevector({m})\n        fidelity = state_fidelity(random_state, evolved)\n        self.assertGreater(fidelity, 0.9)\n",
    "        vqe = VQE(estimator, ansatz, optimizer=SPSA(maxiter={n}))\n        result = vqe.compute_minimum_eigenvalue(hamiltonian)\n        self.assertAlmostEqual(result.eigenvalue.real, -1.857, places=2)\n",
];

const STRUCTURAL: [&str; 12] = [
    "        qc = QuantumCircuit({m})\n        qc.h(0)\n        qc.cx(0, 1)\n        self.assertEqual(qc.num_qubits, {m})\n",
    "        dag = circuit_to_dag(qc)\n        pass_manager = PassManager([Unroller([\"u\", \"cx\"])])\n        out = pass_manager.run(qc)\n        self.assertEqual(circuit_to_dag(out), dag)\n",
    "        theta = Parameter(\"theta\")\n        qc = QuantumCircuit(1)\n        qc.rx(theta, 0)\n        bound = qc.assign_parameters({{theta: {m}}})\n        self.assertEqual(len(bound.parameters), 0)\n",
    "        with self.assertRaises(CircuitError):\n            qc.append(gate, [0, {m}])\n",
    "        op = Operator(qc)\n        self.assertTrue(op.equiv(Operator(expected)))\n",
    "        data = qc.to_dict()\n        restored = QuantumCircuit.from_dict(data)\n        self.assertEqual(restored.name, qc.name)\n",
    "        layout = Layout.generate_trivial_layout(qc.qregs[0])\n        coupling_map = CouplingMap.from_line({m})\n        self.assertTrue(coupling_map.is_connected())\n",
    "        with self.assertWarns(DeprecationWarning):\n            legacy = qc.combine(other)\n        self.assertEqual(legacy.size(), {m})\n",
    "        if qc.num_clbits > 0:\n            self.assertIn(\"measure\", qc.count_ops())\n        else:\n            self.assertNotIn(\"measure\", qc.count_ops())\n",
    "        sv = Statevector.from_label(\"0\" * {m})\n        self.assertEqual(sv.dim, 2 ** {m})\n",
    "        for gate_name in [\"x\", \"y\", \"z\", \"h\"]:\n            gate = get_standard_gate_name_mapping()[gate_name]\n            self.assertEqual(gate.num_qubits, 1)\n",
    "        hi = nk.hilbert.Spin(s=0.5, N={m})\n        assert hi.size == {m}\n        assert hi.is_discrete\n",
];

fn fill(template: &str, rng: &mut Rng) -> String {
    let n = [100, 256, 512, 1000, 1024, 2048, 4096, 8192][rng.random_range(0..8)];
    let m = rng.random_range(2..7);
    template.replace("{n}", &n.to_string()).replace("{m}", &m.to_string()).replace("{{", "{").replace("}}", "}")
}

fn test_file(label: Label, index: usize, rng: &mut Rng) -> String {
    let stochastic_rate = if label.is_flaky() { 0.5 } else { 0.1 };
    let mut out = HEADERS.choose(rng).expect("headers").replace("{name}", &format!("module_{index}"));
    out.push_str(&format!("\n\nclass TestCase{index}(QiskitTestCase):\n"));
    let n_tests = rng.random_range(2..6);
    for t in 0..n_tests {
        out.push_str(&format!("\n    def test_case_{t}(self):\n"));
        let n_snippets = rng.random_range(1..3);
        for _ in 0..n_snippets {
            let pool: &[&str] = if rng.random_bool(stochastic_rate) { &STOCHASTIC } else { &STRUCTURAL };
            let snippet = pool.choose(rng).expect("snippets");
            out.push_str(&fill(snippet, rng));
        }
    }
    out
}

/// In-memory synthetic corpus with the given class sizes.
pub fn synthetic_corpus(flaky: usize, nonflaky: usize, seed: u64) -> Corpus {
    let mut entries = Vec::with_capacity(flaky + nonflaky);
    for (label, count) in [(Label::Flaky, flaky), (Label::NonFlaky, nonflaky)] {
        for i in 0..count {
            let mut rng = seed::stream(seed, label.as_str(), i as u64);
            let repo = if label.is_flaky() { FLAKY_REPOS[i % FLAKY_REPOS.len()] } else { "qiskit" };
            let id = format!("{}/{repo}/test_{i:03}.py", label.as_str());
            let text = test_file(label, i, &mut rng);
            entries.push(CorpusEntry { path: PathBuf::from(&id), id, label, repo: repo.to_string(), text });
        }
    }
    Corpus::new(entries).expect("generated ids are unique")
}

/// Writes a synthetic corpus under `dir` in the `flaky/` + `nonflaky/`
/// layout, plus `manifest.jsonl`. Returns the manifest path.
pub fn write_synthetic_corpus(dir: &Path, flaky: usize, nonflaky: usize, seed: u64) -> io::Result<PathBuf> {
    let corpus = synthetic_corpus(flaky, nonflaky, seed);
    let mut records = Vec::with_capacity(corpus.len());
    for e in corpus.entries() {
        let file = dir.join(&e.id);
        if let Some(parent) = file.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&file, &e.text)?;
        records.push(ManifestRecord {
            id: e.id.clone(),
            path: e.id.clone(),
            label: e.label.as_str().to_string(),
            repo: e.repo.clone(),
        });
    }
    let manifest = dir.join("manifest.jsonl");
    fs::write(&manifest, write_manifest(&records))?;
    Ok(manifest)
}

/// Roughly balanced 2-D points separated by the line `x0 + x1 = 0` with a
/// gap of at least 1 on either side.
pub fn separable_points(n: usize, seed: u64) -> (Matrix, Vec<Label>) {
    let mut rng = seed::stream(seed, "separable", 0);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let p = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
        let s: f64 = p[0] + p[1];
        if s.abs() < 1.0 {
            continue;
        }
        labels.push(if s > 0.0 { Label::Flaky } else { Label::NonFlaky });
        rows.push(p);
    }
    (Matrix::from_rows(&rows).expect("finite points"), labels)
}
