"""Exit gates. Run ``pytest tests/test_acceptance.py -v``; the terminal summary
prints one PASS/FAIL line per criterion.

Criteria 7 to 9 share one trained model (about 11 minutes on a single core, corpus included).
"""
import copy
import time
from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest
from scipy.stats import spearmanr

from circfid.baseline import estimate_fidelity
from circfid.circuit import parse_circuit
from circfid.cli import main
from circfid.dataset import DatasetConfig, circuits_and_labels, generate_records, label_record
from circfid.devices import load_device
from circfid.layout import builtin_coupling_map, enumerate_layouts, interaction_graph, rank_layouts, top_fraction_size
from circfid.metrics import align, d_r2, d_r2_unbounded, expected_ideal_counts
from circfid.nn.gradcheck import demo_problem, grad_check
from circfid.nn.model import ModelConfig, param_count, param_shapes
from circfid.noise import NoiseModel
from circfid.pipeline import FidelityPredictor, reference_rmses, rmse, train_predictor
from circfid.rb import RBSpec, generate_rb_circuit
from circfid.simulator import Counts, run_ideal, run_noisy
from circfid.transpile import IBM_BASIS, Layout, decompose_to_basis, remap
from conftest import BV_TEXT, LEARNING_CORPUS, TIMINGS

# the default 256-unit network is too slow for the 30 minute budget on one core, and
# a forget bias of 1 forgets most of a 500-step circuit before training can fix it
ACCEPTANCE_MODEL = {"embed_dim": 32, "lstm_units": 64, "forget_bias": 4.0, "clip_norm": 1.0, "epochs": 20,
                    "patience": 5, "batch_size": 32, "learning_rate": 1e-3}


def detail(request, text):
    request.node.user_properties.append(("detail", text))


@pytest.fixture(scope="module")
def trained(learning_corpus):
    t0 = time.perf_counter()
    predictor, parts = train_predictor(learning_corpus, 7, ACCEPTANCE_MODEL, seed=0)
    return predictor, parts, time.perf_counter() - t0


@pytest.mark.criterion(1)
def test_d_r2_fixture(request):
    t0 = time.perf_counter()
    ideal = Counts({"10": 1024}, 1024)
    noisy = Counts({"00": 137, "01": 17, "10": 789, "11": 81}, 1024)
    value = d_r2(align(ideal, noisy))
    exact = 1 - Fraction(sum((a - b) ** 2 for a, b in zip((0, 0, 1024, 0), (137, 17, 789, 81))), 786432)
    uniform = Counts({k: 256 for k in ("00", "01", "10", "11")}, 1024)
    detail(request, f"d-R2 {value:.6f}")
    assert abs(value - 0.897202) < 1e-6 and abs(value - float(exact)) < 1e-12
    assert d_r2(align(ideal, uniform)) == 0.0
    assert d_r2(align(ideal, ideal)) == 1.0
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(2)
def test_noise_multiplier_trend(request):
    t0 = time.perf_counter()
    bv = parse_circuit(BV_TEXT)
    ideal = expected_ideal_counts(run_ideal(bv), 1024)
    base = NoiseModel.uniform(3, p1=0.05, p2=0.05, p_meas=0.1, p_reset=0.03)
    means, stds, unbounded_min = [], [], np.inf
    for n in (0, 1, 2, 4, 6, 10):
        nm = base.with_multiplier(n)
        vals, raw = [], []
        for seed in range(20):
            pair = align(ideal, run_noisy(bv, nm, 1024, seed))
            vals.append(d_r2(pair))
            raw.append(d_r2_unbounded(pair))
        means.append(float(np.mean(vals)))
        stds.append(float(np.std(vals, ddof=1)))
        if n >= 6:
            unbounded_min = min(unbounded_min, min(raw))
    detail(request, "means " + " ".join(f"{m:.3f}" for m in means) + f"; min unbounded {unbounded_min:.3f}")
    assert means[0] == 1.0
    for k in range(len(means) - 1):
        sigma = np.hypot(stds[k], stds[k + 1]) / np.sqrt(20)
        assert means[k + 1] <= means[k] + 2 * sigma
    assert means[-1] < means[0]
    assert unbounded_min < 0
    assert time.perf_counter() - t0 < 60


@pytest.mark.criterion(3)
def test_rb_identity_suite(request):
    t0 = time.perf_counter()
    gen = np.random.default_rng(2024)
    worst = 1.0
    for i in range(200):
        n = int(gen.integers(1, 6))
        c = generate_rb_circuit(RBSpec(n_active=n, seq_len=int(gen.integers(1, 6)), seed=10_000 + i))
        worst = min(worst, run_ideal(c).get("0" * n, 0.0))
    detail(request, f"min P(0...0) {worst:.12f}")
    assert worst >= 1 - 1e-9
    assert time.perf_counter() - t0 < 60


@pytest.mark.criterion(4)
def test_layout_counts(request):
    t0 = time.perf_counter()
    montreal = builtin_coupling_map("montreal")
    edge = parse_circuit("qreg q[2];\ncx q[0],q[1];\n")
    path = parse_circuit("qreg q[3];\ncx q[0],q[1];\ncx q[1],q[2];\n")
    n_edge = len(enumerate_layouts(interaction_graph(edge), montreal))
    n_path = len(enumerate_layouts(interaction_graph(path), montreal))
    detail(request, f"{n_edge} / {n_path} layouts, top {top_fraction_size(n_edge)} / {top_fraction_size(n_path)}")
    assert (n_edge, n_path) == (56, 74)
    assert (top_fraction_size(n_edge), top_fraction_size(n_path)) == (6, 7)
    nairobi = builtin_coupling_map("nairobi")
    for c in (edge, path):
        graph = interaction_graph(c)
        oracle = sorted(
            image for image in permutations(range(nairobi.n_qubits), len(graph.vertices))
            if all(nairobi.has_edge(image[graph.vertices.index(a)], image[graph.vertices.index(b)])
                   for a, b in graph.edges)
        )
        assert [lay.as_tuple() for lay in enumerate_layouts(graph, nairobi)] == oracle
    assert time.perf_counter() - t0 < 10


@pytest.mark.criterion(5)
def test_architecture_parameter_count(request):
    cfg = ModelConfig(lanes=7, vocab_size=48)
    shapes = param_shapes(cfg)
    lstm = sum(int(np.prod(shapes[k])) for k in ("lstm_W", "lstm_U", "lstm_b"))
    total = param_count(cfg)
    detail(request, f"LSTM {lstm}, total {total} ({(total - 743_784) / 743_784:+.3%})")
    assert lstm == 721_920
    assert abs(total - 743_784) / 743_784 < 0.01


@pytest.mark.criterion(6)
def test_gradient_check(request):
    t0 = time.perf_counter()
    model, x, y = demo_problem(0)
    worst, _ = grad_check(model, x, y)
    detail(request, f"max relative error {worst:.2e}")
    assert worst < 1e-4
    assert time.perf_counter() - t0 < 30


@pytest.mark.slow
@pytest.mark.criterion(7)
def test_end_to_end_learning(request, learning_corpus, trained):
    predictor, parts, seconds = trained
    assert len(learning_corpus) >= 4000
    c_te, y_te = parts[2]
    model = rmse(predictor.predict(c_te), y_te)
    refs = reference_rmses(parts)
    epochs = len(predictor.regressor.history_.train_loss)
    total = TIMINGS["learning_corpus"] + seconds
    detail(request, f"test RMSE {model:.4f} vs constant {refs['constant_mean_rmse']:.4f}, depth-linear "
                    f"{refs['depth_linear_rmse']:.4f}; {epochs} epochs, {total / 60:.1f} min")
    assert epochs <= 20 and total < 30 * 60
    assert model < 0.15
    assert model < refs["constant_mean_rmse"] and model < refs["depth_linear_rmse"]


@pytest.mark.slow
@pytest.mark.criterion(8)
def test_fine_tuning_adapts_to_new_noise(request, trained):
    t0 = time.perf_counter()
    stale, _, _ = trained
    regime = dict(LEARNING_CORPUS, noise_multiplier=1.5)
    test_c, test_y = circuits_and_labels(generate_records(DatasetConfig(**{**regime, "n_records": 450, "seed": 901})))
    x_test = stale.tokenizer.transform(test_c)
    stale_rmse = rmse(stale.regressor.predict(x_test), test_y)
    wins, gains = 0, []
    for rep in range(10):
        recs = generate_records(DatasetConfig(**{**regime, "n_records": 160, "seed": 1000 + rep}))[:100]
        assert len(recs) == 100
        c, y = circuits_and_labels(recs)
        reg = _copy_regressor(stale.regressor)
        reg.fine_tune(stale.tokenizer.transform(c), y, epochs=5)
        tuned = rmse(reg.predict(x_test), test_y)
        gains.append(stale_rmse - tuned)
        wins += tuned < stale_rmse
    detail(request, f"{wins}/10 improved; stale RMSE {stale_rmse:.4f}, mean gain {np.mean(gains):.4f}")
    assert wins >= 9
    assert time.perf_counter() - t0 < 600


def _copy_regressor(reg):
    return copy.deepcopy(reg)


def _two_qubit_rb(seed):
    spec = RBSpec(n_active=2, seq_len=3, seed=seed, placement=Layout.from_sequence((0, 1)), device_width=2)
    return decompose_to_basis(generate_rb_circuit(spec), IBM_BASIS)


@pytest.mark.slow
@pytest.mark.criterion(9)
def test_model_ranking_avoids_noisy_edge(request, trained):
    stale, _, _ = trained
    device = load_device("nairobi")
    cm = device.coupling
    edges = cm.sorted_edges()
    stale_map = device.calibration()
    excluded, model_rho, base_rho = 0, [], []
    for run in range(10):
        noisy_edge = edges[run % len(edges)]
        shifted = device.with_noisy_edge(noisy_edge, 10.0)
        recs = generate_records(DatasetConfig(**{**LEARNING_CORPUS, "n_records": 300, "seed": 2000 + run}),
                                device=shifted)
        c, y = circuits_and_labels(recs)
        reg = _copy_regressor(stale.regressor)
        reg.fine_tune(stale.tokenizer.transform(c), y, epochs=5)
        tuned = FidelityPredictor(stale.tokenizer, reg)
        circuit = _two_qubit_rb(3000 + run)
        ranked = rank_layouts(circuit, cm, tuned.predict)
        top = ranked[: top_fraction_size(len(ranked))]
        excluded += all(set(layout.as_tuple()) != set(noisy_edge) for layout, _ in top)
        placed = [remap(circuit, layout, cm.n_qubits) for layout, _ in ranked]
        measured = [np.mean([label_record(p, shifted.noise, 1024, 7000 * run + t, identity=True) for t in range(5)])
                    for p in placed]
        model_rho.append(spearmanr([s for _, s in ranked], measured).statistic)
        base_rho.append(spearmanr([estimate_fidelity(p, stale_map) for p in placed], measured).statistic)
    detail(request, f"noisy edge excluded {excluded}/10; Spearman model {np.mean(model_rho):.3f} "
                    f"vs stale baseline {np.mean(base_rho):.3f}")
    assert excluded >= 9
    assert np.mean(model_rho) > np.mean(base_rho)


@pytest.mark.criterion(10)
def test_cli_reruns_are_byte_identical(request, tmp_path):
    (tmp_path / "bv.qasm").write_text(BV_TEXT)
    outputs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        steps = [
            ["gen-dataset", "--out", str(d / "ds.jsonl"), "--stats", str(d / "stats.json"), "--n-records", "80",
             "--seed", "5"],
            ["train", "--dataset", str(d / "ds.jsonl"), "--out", str(d / "model.ckpt"), "--report",
             str(d / "report.json"), "--epochs", "2", "--embed-dim", "8", "--lstm-units", "16"],
            ["eval", str(tmp_path / "bv.qasm"), "--model", str(d / "model.ckpt"), "--trials", "10",
             "--out", str(d / "eval.csv")],
        ]
        for argv in steps:
            assert main(argv) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
    same = [name for name in outputs[0] if outputs[0][name] == outputs[1].get(name)]
    detail(request, f"identical: {', '.join(same)}")
    assert outputs[0].keys() == outputs[1].keys() and len(same) == len(outputs[0]) == 5
