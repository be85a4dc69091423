"""Command-line interface: protocol runs/sweeps, spin spectroscopy, and
reproduction targets, all emitting CSV files with provenance headers plus a
matplotlib plot script per figure target.

Exit codes: 0 success, 1 runtime/numeric failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, default_config, format_config, load_config
from .errors import ConfigError, ErtransError
from .experiments import (
    ALPHA_OVER_G_GRID,
    SweepSpec,
    TEMPERATURE_GRID_K,
    efficiency_vs_time,
    schedule_trace,
    sweep_alpha,
    sweep_temperature,
    write_csv,
)
from .protocol import calibrate_orientation, run_transfer
from .spinham import (
    CoherenceModel,
    default_spin_params,
    energy_levels,
    field_sweep,
    find_zefoz,
    load_spin_params,
    rank_transitions,
)

FIG3A_GAMMA_STARS = (0.0008, 1.0)
FIG3B_GAMMA_STARS = (0.0008, 0.1, 1.0)
FIGA1_ALPHAS_OVER_G = (0.1, 0.24, 1.0)


def _metadata(config: RunConfig, extra: dict = None) -> dict:
    p = config.values["protocol"]
    meta = {
        "tool": f"ertrans {__version__}",
        "G_over_2pi_MHz": p["G_over_2pi_MHz"],
        "alpha_over_G": p["alpha_over_G"],
        "kappa1_over_G": p["kappa1_over_G"],
        "kappa2_over_G": p["kappa2_over_G"],
        "gamma_s_over_G": p["gamma_s_over_G"],
        "gamma_star_over_G": p["gamma_star_over_G"],
        "omega_mw_over_2pi_GHz": p["omega_mw_over_2pi_GHz"],
        "temperature_mK": p["temperature_mK"],
        "dims": "x".join(str(d) for d in p["dims"]),
        "step_s": config.protocol_params().resolved_step,
    }
    if extra:
        meta.update(extra)
    return meta


def _spin_metadata(config: RunConfig, params) -> dict:
    s = config.values["spin"]
    return {
        "tool": f"ertrans {__version__}",
        "spin_params_source": params.source or "default site-1 file",
        "site": params.site,
        "B_T": " ".join(str(b) for b in s["B_T"]),
        "delta_B_uT": s["delta_B_uT"],
    }


def _spin_params(config: RunConfig):
    path = config.values["spin"]["params_file"]
    if not path:
        return default_spin_params()
    if not Path(path).exists():
        raise ConfigError(
            f"spin parameter file not found: {path}. Expected a flat key=value "
            "text file with keys g_row_major, A_MHz_row_major, Q_MHz_row_major "
            "(9 numbers each), g_n, S, I, beta_e_GHz_per_T, beta_n_MHz_per_T, "
            "site, source."
        )
    return load_spin_params(path)


def _coherence_model(config: RunConfig) -> CoherenceModel:
    return CoherenceModel(delta_B=config.values["spin"]["delta_B_uT"] * 1e-6)


def _write_plot_script(out_dir: Path, name: str, body: str):
    script = out_dir / f"plot_{name}.py"
    script.write_text(
        "#!/usr/bin/env python3\n"
        f'"""Plot {name}.csv (generated alongside this script)."""\n'
        "import matplotlib.pyplot as plt\n"
        "import numpy as np\n\n"
        f"with open('{name}.csv') as fh:\n"
        "    lines = [l for l in fh if not l.startswith('#')]\n"
        "data = np.genfromtxt(lines, delimiter=',', names=True)\n"
        + body
        + "\nplt.tight_layout()\n"
        f"plt.savefig('{name}.png', dpi=150)\n"
    )


# ---------------------------------------------------------------------------
# commands


def cmd_protocol_run(config: RunConfig, out_dir: Path, workers: int) -> int:
    params = config.protocol_params()
    result = run_transfer(params)
    print(f"efficiency = {result.efficiency:.6f}")
    print(f"noise      = {result.noise:.6f}")
    print(f"signal     = {result.signal:.6f}")
    print(f"fidelity   = {result.fidelity_snr:.6f}")
    print(f"orientation = {result.orientation}")
    rows = [
        {
            "t_s": t,
            "n_optical": no,
            "n_microwave": nm,
            "n_spin": ns,
        }
        for t, no, nm, ns in zip(
            result.times, result.n_optical, result.n_microwave, result.n_spin
        )
    ]
    meta = _metadata(config, {"orientation": result.orientation,
                              "nbar_thermal": result.nbar_thermal})
    write_csv(out_dir / "protocol_run.csv", meta,
              ["t_s", "n_optical", "n_microwave", "n_spin"], rows)
    return 0


def _fig2(config: RunConfig, out_dir: Path, workers: int):
    sw = config.values["sweep"]
    values = tuple(
        np.round(
            np.arange(sw["alpha_over_G_min"],
                      sw["alpha_over_G_max"] + 1e-9,
                      sw["alpha_over_G_step"]),
            9,
        )
    )
    base = config.protocol_params(t_final=None)
    spec = SweepSpec(base=base, swept_parameter="alpha_over_G",
                     values=values, workers=workers)
    rows, best = sweep_alpha(spec)
    fields = list(rows[0].keys())
    meta = _metadata(config, {"argmax_alpha_over_G": best,
                              "orientation": rows[0]["orientation"]})
    write_csv(out_dir / "fig2.csv", meta, fields, rows)
    _write_plot_script(
        out_dir, "fig2",
        "plt.plot(data['alpha_over_G'], data['efficiency'], label='efficiency')\n"
        "plt.plot(data['alpha_over_G'], data['fidelity'], label='fidelity')\n"
        "plt.plot(data['alpha_over_G'], data['noise'], label='noise')\n"
        "plt.xlabel('alpha/G')\nplt.legend()\n",
    )
    print(f"fig2.csv written; efficiency peak at alpha/G = {best}")
    return rows, best


def cmd_protocol_sweep(config: RunConfig, out_dir: Path, workers: int) -> int:
    _fig2(config, out_dir, workers)
    return 0


def cmd_spin_levels(config: RunConfig, out_dir: Path, args) -> int:
    params = _spin_params(config)
    B = np.asarray(config.values["spin"]["B_T"], dtype=float)
    w, _ = energy_levels(params, B)
    rows = [{"level": k + 1, "frequency_GHz": val / 1e9}
            for k, val in enumerate(w)]
    write_csv(out_dir / "spin_levels.csv", _spin_metadata(config, params),
              ["level", "frequency_GHz"], rows)
    for row in rows:
        print(f"{row['level']:2d}  {row['frequency_GHz']:.6f} GHz")
    return 0


def _transition_rows(records):
    rows = []
    for r in records:
        rows.append({
            "level_m": r.level_pair[0],
            "level_n": r.level_pair[1],
            "frequency_GHz": r.frequency_GHz,
            "d_D1_GHz_per_T": r.dipole_GHz_per_T[0],
            "d_D2_GHz_per_T": r.dipole_GHz_per_T[1],
            "d_b_GHz_per_T": r.dipole_GHz_per_T[2],
            "S1_Hz_per_T": r.S1_Hz_per_T,
            "S2_Hz_per_T2": r.S2_Hz_per_T2,
            "T2_us": r.T2_s * 1e6,
        })
    return rows


_TRANSITION_FIELDS = [
    "level_m", "level_n", "frequency_GHz", "d_D1_GHz_per_T", "d_D2_GHz_per_T",
    "d_b_GHz_per_T", "S1_Hz_per_T", "S2_Hz_per_T2", "T2_us",
]


def cmd_spin_transitions(config: RunConfig, out_dir: Path, args) -> int:
    params = _spin_params(config)
    B = np.asarray(config.values["spin"]["B_T"], dtype=float)
    window = config.values["spin"]["window_GHz"]
    records = rank_transitions(params, B, window, _coherence_model(config))
    rows = _transition_rows(records)
    write_csv(out_dir / "spin_transitions.csv",
              _spin_metadata(config, params), _TRANSITION_FIELDS, rows)
    for row in rows[:10]:
        print(
            f"({row['level_m']},{row['level_n']}) "
            f"{row['frequency_GHz']:.4f} GHz  "
            f"d=({row['d_D1_GHz_per_T']:.2f},{row['d_D2_GHz_per_T']:.2f},"
            f"{row['d_b_GHz_per_T']:.2f}) GHz/T  T2={row['T2_us']:.2f} us"
        )
    return 0


def cmd_spin_sweep(config: RunConfig, out_dir: Path, args) -> int:
    params = _spin_params(config)
    axis = config.sweep_axis_vector()
    s = config.values["spin"]
    bs, freqs = field_sweep(params, axis, s["sweep_Bmax_T"],
                            int(s["sweep_steps"]))
    fields = ["B_T"] + [f"level_{k + 1}_GHz" for k in range(freqs.shape[1])]
    rows = []
    for b, row in zip(bs, freqs):
        entry = {"B_T": b}
        entry.update({f"level_{k + 1}_GHz": v / 1e9 for k, v in enumerate(row)})
        rows.append(entry)
    meta = _spin_metadata(config, params)
    meta["sweep_axis"] = s["sweep_axis"]
    write_csv(out_dir / "spin_sweep.csv", meta, fields, rows)
    print(f"spin_sweep.csv written ({len(rows)} field points)")
    return 0


def cmd_spin_zefoz(config: RunConfig, out_dir: Path, args) -> int:
    params = _spin_params(config)
    B = np.asarray(config.values["spin"]["B_T"], dtype=float)
    tol = config.values["spin"]["zefoz_tol_MHz_per_T"] * 1e6
    hits = find_zefoz(params, [B], tol, _coherence_model(config))
    rows = [
        {
            "level_m": pair[0],
            "level_n": pair[1],
            "frequency_GHz": freq / 1e9,
            "T2_us": t2 * 1e6,
        }
        for _, pair, freq, t2 in hits
    ]
    rows.sort(key=lambda r: -r["T2_us"])
    meta = _spin_metadata(config, params)
    meta["zefoz_tol_MHz_per_T"] = tol / 1e6
    write_csv(out_dir / "spin_zefoz.csv", meta,
              ["level_m", "level_n", "frequency_GHz", "T2_us"], rows)
    for row in rows[:10]:
        print(
            f"({row['level_m']},{row['level_n']}) "
            f"{row['frequency_GHz']:.4f} GHz  T2={row['T2_us']:.1f} us"
        )
    return 0


# ---------------------------------------------------------------------------
# reproduction targets


def _reproduce_fig2(config, out_dir, workers):
    _fig2(config, out_dir, workers)


def _reproduce_fig3a(config, out_dir, workers):
    sw = config.values["sweep"]
    temps = tuple(
        np.round(
            np.arange(sw["temperature_mK_min"],
                      sw["temperature_mK_max"] + 1e-9,
                      sw["temperature_mK_step"]) * 1e-3,
            9,
        )
    )
    base = config.protocol_params()
    spec = SweepSpec(base=base, swept_parameter="temperature_K",
                     values=temps, workers=workers)
    curves = sweep_temperature(spec, FIG3A_GAMMA_STARS)
    rows = []
    for gs, curve in curves.items():
        for row in curve:
            entry = dict(row)
            entry["gamma_star_over_G"] = gs
            rows.append(entry)
    fields = ["gamma_star_over_G"] + [
        k for k in rows[0] if k != "gamma_star_over_G"
    ]
    meta = _metadata(config, {"gamma_stars_over_G":
                              " ".join(str(g) for g in FIG3A_GAMMA_STARS)})
    write_csv(out_dir / "fig3a.csv", meta, fields, rows)
    _write_plot_script(
        out_dir, "fig3a",
        "for gs in np.unique(data['gamma_star_over_G']):\n"
        "    sel = data['gamma_star_over_G'] == gs\n"
        "    plt.plot(data['temperature_K'][sel] * 1e3,\n"
        "             data['fidelity'][sel], label=f'gamma*={gs}G')\n"
        "plt.xlabel('temperature (mK)')\nplt.ylabel('fidelity')\nplt.legend()\n",
    )
    print("fig3a.csv written")


def _reproduce_fig3b(config, out_dir, workers):
    base = config.protocol_params()
    curves = efficiency_vs_time(base, FIG3B_GAMMA_STARS)
    rows = []
    for gs, (times, n_opt, final) in curves.items():
        for t, n in zip(times, n_opt):
            rows.append({"gamma_star_over_G": gs, "t_s": t, "n_optical": n})
        print(f"gamma*/G = {gs}: final efficiency {final:.4f}")
    meta = _metadata(config, {"gamma_stars_over_G":
                              " ".join(str(g) for g in FIG3B_GAMMA_STARS)})
    write_csv(out_dir / "fig3b.csv", meta,
              ["gamma_star_over_G", "t_s", "n_optical"], rows)
    _write_plot_script(
        out_dir, "fig3b",
        "for gs in np.unique(data['gamma_star_over_G']):\n"
        "    sel = data['gamma_star_over_G'] == gs\n"
        "    plt.plot(data['t_s'][sel], data['n_optical'][sel],\n"
        "             label=f'gamma*={gs}G')\n"
        "plt.xlabel('t (s)')\nplt.ylabel('optical population')\nplt.legend()\n",
    )
    print("fig3b.csv written")


def _reproduce_figA1(config, out_dir, workers):
    params = config.protocol_params()
    alphas = [a * params.G for a in FIGA1_ALPHAS_OVER_G]
    blocks = schedule_trace(params.G, alphas)
    rows = []
    for aog, alpha in zip(FIGA1_ALPHAS_OVER_G, alphas):
        for row in blocks[alpha]:
            entry = {"alpha_over_G": aog}
            entry.update(row)
            rows.append(entry)
    meta = _metadata(config, {"alphas_over_G":
                              " ".join(str(a) for a in FIGA1_ALPHAS_OVER_G)})
    write_csv(out_dir / "figA1.csv", meta,
              ["alpha_over_G", "t", "G1", "G2", "normalization_residual"],
              rows)
    _write_plot_script(
        out_dir, "figA1",
        "for a in np.unique(data['alpha_over_G']):\n"
        "    sel = data['alpha_over_G'] == a\n"
        "    plt.plot(data['t'][sel], data['G1'][sel], label=f'G1, a={a}G')\n"
        "    plt.plot(data['t'][sel], data['G2'][sel], '--', label=f'G2, a={a}G')\n"
        "plt.xlabel('t')\nplt.legend()\n",
    )
    print("figA1.csv written")


def _reproduce_figA2(config, out_dir, workers):
    cmd_spin_sweep(config, out_dir, None)
    (out_dir / "spin_sweep.csv").rename(out_dir / "figA2.csv")
    _write_plot_script(
        out_dir, "figA2",
        "for k in range(1, 17):\n"
        "    plt.plot(data['B_T'], data[f'level_{k}_GHz'])\n"
        "plt.xlabel('B along b (T)')\nplt.ylabel('frequency (GHz)')\n",
    )
    print("figA2.csv written")


def _reproduce_table1(config, out_dir, workers):
    params = _spin_params(config)
    B = np.asarray(config.values["spin"]["B_T"], dtype=float)
    records = rank_transitions(params, B, (1.0, 3.0),
                               _coherence_model(config))[:5]
    rows = _transition_rows(records)
    write_csv(out_dir / "table1.csv", _spin_metadata(config, params),
              _TRANSITION_FIELDS, rows)
    print(f"{'pair':>8} {'freq (GHz)':>11} {'d(D1,D2,b) (GHz/T)':>22} "
          f"{'T2 (us)':>8}")
    for r in rows:
        print(
            f"({r['level_m']:2d},{r['level_n']:2d}) "
            f"{r['frequency_GHz']:11.3f} "
            f"({r['d_D1_GHz_per_T']:5.2f},{r['d_D2_GHz_per_T']:5.2f},"
            f"{r['d_b_GHz_per_T']:5.2f}) {r['T2_us']:8.2f}"
        )


def _reproduce_zefoz(config, out_dir, workers):
    cmd_spin_zefoz(config, out_dir, None)


_REPRODUCE = {
    "fig2": _reproduce_fig2,
    "fig3a": _reproduce_fig3a,
    "fig3b": _reproduce_fig3b,
    "figA1": _reproduce_figA1,
    "figA2": _reproduce_figA2,
    "table1": _reproduce_table1,
    "zefoz": _reproduce_zefoz,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ertrans",
        description="Dark-state microwave-to-optical transduction simulator "
        "and Er:YSO spin-Hamiltonian spectroscopy",
    )
    parser.add_argument("--config", help="path to a run-configuration file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--print-config", action="store_true",
                        help="print the resolved configuration and exit")
    parser.add_argument("--workers", type=int, default=1,
                        help="worker count for sweeps")
    sub = parser.add_subparsers(dest="command")

    protocol = sub.add_parser("protocol", help="transfer-protocol commands")
    psub = protocol.add_subparsers(dest="subcommand", required=True)
    psub.add_parser("run", help="single transfer evaluation")
    psub.add_parser("sweep", help="alpha/G sweep (fig2.csv)")

    spin = sub.add_parser("spin", help="spin-Hamiltonian commands")
    ssub = spin.add_subparsers(dest="subcommand", required=True)
    lv = ssub.add_parser("levels", help="hyperfine levels at a field")
    lv.add_argument("--B", help="field as 'Bx,By,Bz' in tesla")
    tr = ssub.add_parser("transitions", help="ranked transitions in a window")
    tr.add_argument("--B", help="field as 'Bx,By,Bz' in tesla")
    tr.add_argument("--window", help="frequency window 'lo:hi' in GHz")
    swp = ssub.add_parser("sweep", help="levels vs field magnitude")
    swp.add_argument("--axis", help="D1, D2, b, or 'x,y,z'")
    swp.add_argument("--Bmax", type=float, help="maximum field in tesla")
    swp.add_argument("--steps", type=int, help="number of field points")
    zf = ssub.add_parser("zefoz", help="zero-first-order-Zeeman search")
    zf.add_argument("--B", help="field as 'Bx,By,Bz' in tesla")
    zf.add_argument("--tol", type=float, help="gradient tolerance in MHz/T")

    rep = sub.add_parser("reproduce", help="figure/table reproduction")
    rep.add_argument("target", choices=sorted(_REPRODUCE))
    return parser


def _apply_cli_overrides(config: RunConfig, args) -> RunConfig:
    values = {s: dict(d) for s, d in config.values.items()}
    spin = values["spin"]
    if getattr(args, "B", None):
        spin["B_T"] = tuple(float(p) for p in args.B.replace(",", " ").split())
    if getattr(args, "window", None):
        spin["window_GHz"] = tuple(
            float(p) for p in args.window.replace(":", " ").split()
        )
    if getattr(args, "axis", None):
        spin["sweep_axis"] = args.axis.replace(",", " ")
    if getattr(args, "Bmax", None):
        spin["sweep_Bmax_T"] = args.Bmax
    if getattr(args, "steps", None):
        spin["sweep_steps"] = args.steps
    if getattr(args, "tol", None):
        spin["zefoz_tol_MHz_per_T"] = args.tol
    return RunConfig(values)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        config = _apply_cli_overrides(config, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        print(format_config(config))
        return 0
    if args.command is None:
        parser.print_help()
        return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if args.command == "protocol":
            if args.subcommand == "run":
                return cmd_protocol_run(config, out_dir, args.workers)
            return cmd_protocol_sweep(config, out_dir, args.workers)
        if args.command == "spin":
            handler = {
                "levels": cmd_spin_levels,
                "transitions": cmd_spin_transitions,
                "sweep": cmd_spin_sweep,
                "zefoz": cmd_spin_zefoz,
            }[args.subcommand]
            return handler(config, out_dir, args)
        if args.command == "reproduce":
            _REPRODUCE[args.target](config, out_dir, args.workers)
            return 0
        parser.print_help()
        return 2
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except ErtransError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
