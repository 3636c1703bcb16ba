"""Acceptance suite.

Desk-scale protocol: d=2, width 16, K=12, T=5, GeLU, periodic encoding,
default init, reference grid 512, resolution ladder {32, 64, 128, 256},
5 random inputs per regularity.  Each criterion prints one PASS/FAIL line
(run pytest with -s or check captured output).

Slow criteria (the resolution study and the scheduler benchmark) sit at the
end of the file; the whole suite is tens of minutes on one CPU.
"""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fnodisc.analysis import (
    convergence_experiment,
    decompose_trace,
    fit_loglog_slope,
    state_norm_profile,
)
from fnodisc.cli import emit_report
from fnodisc.fno import FnoConfig, forward, init_params
from fnodisc.grf import GrfSpec, sample_grf, subsample
from fnodisc.seeding import derive_seed
from fnodisc.spectral import (
    GridField,
    SpectralField,
    aliasing_decomposition,
    dft,
    embed_spectrum,
    idft_on_grid,
    modes,
    norm,
    trig_interpolate,
)
from fnodisc.train import (
    SchedulerConfig,
    TrainConfig,
    gradient_check,
    make_dataset,
    restrict_batch,
    train_loop,
)

SEED = 20260809
S_LIST = [0.5, 1.0, 1.5, 2.0]
N_LIST = [32, 64, 128, 256]
N_REF = 512
N_SAMPLES = 5

ARTIFACTS = Path(__file__).parent / "artifacts" / "acceptance"

DESK = dict(
    d=2,
    in_channels=1,
    out_channels=1,
    width=16,
    n_layers=5,
    modes=12,
    activation="gelu",
    encoding="periodic",
)


def report(num: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE CRITERION {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


def bandlimited_field(n, kmax, seed=0):
    rng = np.random.default_rng(seed)
    coeffs = np.zeros((n, n, 1), dtype=complex)
    for k1 in range(-kmax, kmax + 1):
        for k2 in range(-kmax, kmax + 1):
            if (k1, k2) <= (0, 0):
                continue
            z = rng.standard_normal() + 1j * rng.standard_normal()
            coeffs[k1 % n, k2 % n, 0] = z
            coeffs[(-k1) % n, (-k2) % n, 0] = np.conj(z)
    return idft_on_grid(SpectralField(coeffs), n)


# ---------------------------------------------------------------------------
# 1. spectral exactness


def test_criterion_01_spectral_exactness():
    rng = np.random.default_rng(SEED)
    worst = 0.0

    for d, n in ((1, 64), (2, 32), (2, 48)):
        f = GridField(rng.standard_normal((n,) * d + (2,)))
        # Parseval
        lhs = norm(f, "l2") ** 2
        rhs = float(np.sum(np.abs(dft(f).coeffs) ** 2))
        worst = max(worst, abs(lhs - rhs) / lhs)
        # inversion
        back = idft_on_grid(dft(f), n)
        worst = max(
            worst,
            np.abs(back.values - f.values).max() / np.abs(f.values).max(),
        )
        # interpolation fixed points
        fine = trig_interpolate(f, 4 * n)
        sl = (slice(None, None, 4),) * d
        worst = max(
            worst, np.abs(fine.values[sl] - f.values).max() / np.abs(f.values).max()
        )

    # aliasing fold identity with handpicked modes: 3, 3+8, 3-16 on N=8
    n_ref, n = 64, 8
    amps = {3: 0.8 - 0.3j, 11: 0.4 + 0.2j, -13: -0.6 + 0.1j}
    coeffs = np.zeros((n_ref, 1), dtype=complex)
    for k, a in amps.items():
        coeffs[k % n_ref, 0] = a
        coeffs[(-k) % n_ref, 0] = np.conj(a)
    fine = idft_on_grid(SpectralField(coeffs), n_ref)
    folded = dft(GridField(fine.values[:: n_ref // n])).coeffs
    expected = amps[3] + amps[11] + amps[-13]
    worst = max(worst, abs(folded[3, 0] - expected))
    # the +-3 pair each collects the fold-ins of 11 and -13
    tail, alias = aliasing_decomposition(SpectralField(coeffs), n)
    alias_expected = np.sqrt(2.0) * abs(amps[11] + amps[-13])
    tail_expected = np.sqrt(2.0 * (abs(amps[11]) ** 2 + abs(amps[-13]) ** 2))
    worst = max(worst, abs(alias - alias_expected), abs(tail - tail_expected))

    report(1, worst <= 1e-12, f"max relative defect {worst:.2e} (tol 1e-12)")


# ---------------------------------------------------------------------------
# 2. interpolation rate


def test_criterion_02_interpolation_rate():
    details = []
    ok = True
    for s in S_LIST:
        errs = np.zeros(len(N_LIST))
        for j in range(N_SAMPLES):
            spec = GrfSpec(
                s=s, d=2, n_ref=N_REF, seed=derive_seed(SEED, 2, int(s * 10), j)
            )
            master = sample_grf(spec)
            truth = dft(master).coeffs
            for i, n in enumerate(N_LIST):
                emb = embed_spectrum(dft(subsample(master, n)).coeffs, 2, n, N_REF)
                errs[i] += float(np.sqrt(np.sum(np.abs(emb - truth) ** 2)))
        slope, _, _ = fit_loglog_slope(N_LIST, errs / N_SAMPLES)
        details.append(f"s={s}: {slope:+.3f}")
        ok = ok and abs(slope + s) <= 0.3
    report(2, ok, "fitted slopes " + ", ".join(details) + " (each within +-0.3 of -s)")


# ---------------------------------------------------------------------------
# 3-5. state error rates across the resolution ladder


@pytest.fixture(scope="module")
def gelu_report():
    rep = convergence_experiment(
        FnoConfig(**DESK), "default", S_LIST, N_LIST, N_REF, N_SAMPLES, SEED
    )
    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    emit_report(
        ARTIFACTS,
        "error_report",
        rep.to_dict(),
        ("s", "seed", "N", "layer", "rel_err"),
        rep.csv_rows(),
    )
    return rep


@pytest.fixture(scope="module")
def s2_dual_metric_slopes():
    """Interpolated-state and shared-grid-point slopes at s=2, both activations.

    The interpolated comparison (the reporting metric) contains the coarse
    state's own representation error, which for a kinked activation output
    decays like N^{-1.5} regardless of how clean the propagated error is;
    the shared-point comparison isolates the propagated error that the
    layer recursion describes.  The first-layer claim is about the latter:
    the transform only sees an activation output from the second layer on.
    """
    from fnodisc.analysis import _ReferenceSpectra, relative_layer_error_shared

    out = {}
    for activation in ("gelu", "relu"):
        cfg = FnoConfig(**dict(DESK, activation=activation))
        params = init_params(cfg, "default", seed=derive_seed(SEED, 0))
        interp = np.zeros((N_SAMPLES, len(N_LIST), cfg.n_layers + 1))
        shared = np.zeros_like(interp)
        for j in range(N_SAMPLES):
            master = sample_grf(
                GrfSpec(s=2.0, d=2, n_ref=N_REF, seed=derive_seed(SEED, 1, 3, j))
            )
            _, ref = forward(params, master, capture_trace=True)
            spectra = _ReferenceSpectra(ref)
            for i, n in enumerate(N_LIST):
                _, tr = forward(params, subsample(master, n), capture_trace=True)
                interp[j, i] = spectra.layer_errors(tr)
                shared[j, i] = relative_layer_error_shared(tr, ref)
            del ref, spectra
        interp_mean = interp.mean(axis=0)
        shared_mean = shared.mean(axis=0)
        out[activation] = {
            "interp": np.array(
                [fit_loglog_slope(N_LIST, interp_mean[:, t])[0] for t in range(6)]
            ),
            # layer 0 is exactly zero at shared points; fit layers 1..T
            "shared": np.array(
                [np.nan]
                + [fit_loglog_slope(N_LIST, shared_mean[:, t])[0] for t in range(1, 6)]
            ),
        }
    return out


def test_criterion_03_state_error_rate(gelu_report):
    slopes = gelu_report.slopes
    ok = True
    details = []
    for i, s in enumerate(S_LIST):
        layer_slopes = slopes[i]
        if s in (0.5, 1.0):
            good = np.all(np.abs(layer_slopes + s) <= 0.35)
        else:
            good = np.all(layer_slopes <= -1.2)
        ok = ok and good
        details.append(f"s={s}: [{layer_slopes.min():+.2f}, {layer_slopes.max():+.2f}]")
    monotone = bool(np.all(np.diff(gelu_report.mean_rel_err, axis=1) < 0))
    ok = ok and monotone
    report(
        3,
        ok,
        "per-layer slope ranges " + "; ".join(details) + f"; monotone in N: {monotone}",
    )


def test_criterion_04_relu_saturation(s2_dual_metric_slopes):
    gelu = s2_dual_metric_slopes["gelu"]
    relu = s2_dual_metric_slopes["relu"]
    # saturation of the reported decay at the deeper layers
    deep_gaps = relu["interp"][2:] - gelu["interp"][2:]
    # first-layer parity of the propagated (shared-grid-point) error
    layer1_gap = abs(relu["shared"][1] - gelu["shared"][1])
    ok = bool(np.all(deep_gaps >= 0.25) and layer1_gap <= 0.15)
    report(
        4,
        ok,
        f"layer>=2 slope gaps {np.array2string(deep_gaps, precision=2)} (need >= 0.25); "
        f"layer-1 propagated-error slope gap {layer1_gap:.3f} (need <= 0.15)",
    )


def test_criterion_05_encoding_saturation():
    cfg = dict(DESK, encoding="nonperiodic")
    rep = convergence_experiment(
        FnoConfig(**cfg), "default", [2.0], N_LIST, N_REF, N_SAMPLES, SEED
    )
    slopes = rep.slopes[0]
    ok = bool(np.all(slopes > -1.0))
    report(
        5,
        ok,
        f"nonperiodic-encoding slopes in [{slopes.min():+.2f}, {slopes.max():+.2f}] (need all > -1.0)",
    )


# ---------------------------------------------------------------------------
# 6. initialization diagnostics


def test_criterion_06_state_norm_profiles():
    cfg = FnoConfig(**DESK)
    ratios = {}
    for scheme, scale in (("default", 1.0), ("scaled", 10.0), ("all_ones", 1.0)):
        vals = []
        for j in range(5):
            params = init_params(cfg, scheme, seed=derive_seed(SEED, 6, j), scale=scale)
            a = sample_grf(GrfSpec(s=2.0, d=2, n_ref=64, seed=derive_seed(SEED, 60, j)))
            _, trace = forward(params, a, capture_trace=True)
            prof = state_norm_profile(trace)
            vals.append(prof[-1] / prof[1])
        ratios[scheme] = vals
    ok = (
        all(r > 10.0 for r in ratios["scaled"])
        and all(r > 10.0 for r in ratios["all_ones"])
        and all(0.1 <= r <= 10.0 for r in ratios["default"])
    )
    summary = {k: f"[{min(v):.2g}, {max(v):.2g}]" for k, v in ratios.items()}
    report(6, ok, f"growth ratios norm(v_T)/norm(v_1): {summary}")


# ---------------------------------------------------------------------------
# 7. per-layer error decomposition consistency


def test_criterion_07_error_decomposition():
    from fnodisc.analysis import error_components

    checked = 0
    for activation in ("gelu", "relu"):
        params = init_params(
            FnoConfig(**dict(DESK, activation=activation)), "default",
            seed=derive_seed(SEED, 7),
        )
        for s in (1.0, 2.0):
            master = sample_grf(
                GrfSpec(s=s, d=2, n_ref=N_REF, seed=derive_seed(SEED, 70, int(s * 10)))
            )
            _, ref = forward(params, master, capture_trace=True)
            for n in (32, 64, 128):
                _, coarse = forward(params, subsample(master, n), capture_trace=True)
                rep = decompose_trace(params, coarse, ref, s, SEED)
                rep.check()  # raises on any identity or bound violation
                checked += len(rep.rows)
            del ref

    # bandlimited identity-activation run: every component at round-off
    id_params = init_params(
        FnoConfig(**dict(DESK, activation="identity", encoding="none")),
        "default",
        seed=derive_seed(SEED, 71),
    )
    fine = bandlimited_field(256, 12, seed=3)
    _, ref = forward(id_params, fine, capture_trace=True)
    _, coarse = forward(id_params, GridField(fine.values[::8, ::8]), capture_trace=True)
    scale = max(np.abs(s.values).max() for s in ref.states)
    worst = 0.0
    for t in range(id_params.config.n_layers):
        row = error_components(id_params, coarse, ref, t)
        worst = max(worst, row.e0, row.e1, row.e2, row.e3, row.e0_next)
        checked += 1
    ok = worst <= 1e-12 * max(1.0, scale)
    report(
        7,
        ok,
        f"{checked} rows: transform identity to 1e-10, propagation bounds hold; "
        f"bandlimited identity components max {worst:.2e}",
    )


# ---------------------------------------------------------------------------
# 8. gradient audit


def test_criterion_08_gradient_audit():
    worst = 0.0
    cases = []
    for kind, out_ch in (("gradient_map", 2), ("inverse_helmholtz", 1)):
        cfg = FnoConfig(
            d=2, in_channels=1, out_channels=out_ch, width=8, n_layers=3, modes=4,
            activation="gelu", encoding="periodic",
        )
        params = init_params(cfg, "default", seed=derive_seed(SEED, 8))
        ds = make_dataset(kind, 3, 2.0, 128, seed=derive_seed(SEED, 80), split=(3, 0, 0))
        xs = restrict_batch(ds.inputs, 32)
        ys = restrict_batch(ds.targets, 32)
        for loss in ("relative_l2", "mse"):
            rep = gradient_check(
                params, xs, ys, loss, n_coords=200, h=1e-5,
                seed=derive_seed(SEED, 81),
            )
            worst = max(worst, rep["max_rel_err"])
            cases.append(f"{kind}/{loss}: {rep['max_rel_err']:.1e}")
    report(8, worst < 1e-5, "adjoint vs central differences - " + "; ".join(cases))


# ---------------------------------------------------------------------------
# 9. adaptive-resolution training benchmark (slow)


def test_criterion_09_scheduler_benchmark():
    cfg = FnoConfig(
        d=2, in_channels=1, out_channels=1, width=8, n_layers=3, modes=4,
        activation="gelu", encoding="periodic",
    )
    params = init_params(cfg, "default", seed=derive_seed(SEED, 9))
    ds = make_dataset(
        "inverse_helmholtz", 1400, 2.0, 128, seed=derive_seed(SEED, 90),
        split=(1000, 200, 200),
    )
    tc = TrainConfig(
        epochs=200, batch_size=50, lr=2e-3, loss="relative_l2", eval_grid=64,
        seed=derive_seed(SEED, 91),
    )
    sched_cfg = SchedulerConfig(ladder=(16, 32, 64), patience=40)

    _, base_hist = train_loop(params, ds, tc)
    _, sched_hist = train_loop(params, ds, tc, sched_cfg)

    ARTIFACTS.mkdir(parents=True, exist_ok=True)
    for name, hist in (("history_fixed", base_hist), ("history_scheduled", sched_hist)):
        emit_report(ARTIFACTS, name, hist.to_dict(), hist.COLUMNS, hist.csv_rows())

    cost_sched = sched_hist.cum_gridpoint_epochs[-1]
    cost_base = base_hist.cum_gridpoint_epochs[-1]
    err_sched = sched_hist.test_err[-1]
    err_base = base_hist.test_err[-1]
    ok = cost_sched < cost_base and err_sched <= 1.5 * err_base
    report(
        9,
        ok,
        f"grid-point-epochs {cost_sched:.3g} vs fixed {cost_base:.3g}; "
        f"final test error {err_sched:.4f} vs fixed {err_base:.4f} "
        f"(ratio {err_sched / err_base:.2f}, need <= 1.5); grids visited "
        f"{sorted(set(sched_hist.grid))}",
    )


# ---------------------------------------------------------------------------
# 10. determinism of every runnable


def test_criterion_10_byte_identical_reports(tmp_path):
    from test_cli import CONFIGS, run_cli

    diffs = []
    for command, cfg_text in sorted(CONFIGS.items()):
        cfg = tmp_path / f"{command}.toml"
        cfg.write_text(cfg_text)
        dirs = []
        for run in ("a", "b"):
            out = tmp_path / f"{command}-{run}"
            res = run_cli([command, "--config", str(cfg), "--out", str(out)])
            assert res.returncode == 0, (command, res.stderr)
            dirs.append(out / command.replace("-", "_"))
        for name in sorted(p.name for p in dirs[0].iterdir()):
            if (dirs[0] / name).read_bytes() != (dirs[1] / name).read_bytes():
                diffs.append(f"{command}/{name}")
    report(
        10,
        not diffs,
        "all subcommand reruns byte-identical" if not diffs else f"differs: {diffs}",
    )
