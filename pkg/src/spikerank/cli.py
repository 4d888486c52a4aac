"""Command-line front end. Window flags are in minutes, everything else in seconds."""
from __future__ import annotations

import argparse
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__
from .dynamics import ModelParams, expected_iteration, fit_decay, half_life, scores_to_csv, simulate, steady_state
from .errors import ConvergenceError, DomainError, ParseError
from .events import basal_rates, read_events, serialize_events, volume_series
from .graph import adjacency_to_csv, build_adjacency, spectral_radius
from .ranking import default_grid, detect_spike, evaluate_spike, rank_users, responsiveness
from .synth import FAMILIES, SynthConfig, format_metadata, generate


class UsageError(Exception):
    pass


def _write(path, text):
    """Write ``text`` to ``path`` atomically, or to stdout when path is None."""
    if path is None:
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".spikerank-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _minutes(value):
    return None if value is None else float(value) * 60.0


def _window(args, start, end, label):
    t0, t1 = _minutes(getattr(args, start)), _minutes(getattr(args, end))
    if t0 is None or t1 is None:
        raise UsageError(f"--{start.replace('_', '-')} and --{end.replace('_', '-')} are required ({label} window)")
    if not t0 < t1:
        raise UsageError(f"{label} window must satisfy start < end, got [{t0 / 60:g}, {t1 / 60:g}) minutes")
    return t0, t1


def _alpha_star(value):
    if value is None:
        raise UsageError("--alpha-star is required")
    if not 0 <= value < 1:
        raise UsageError(f"--alpha-star must satisfy 0 <= alpha_star < 1, got {value}")
    return value


def _float_list(text, flag):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def _require_input(args):
    if args.input is None:
        raise UsageError("--input is required")
    return read_events(args.input)


def cmd_volume(args):
    log = _require_input(args)
    vol = volume_series(log, args.bin)
    lines = ["bin,start,count"]
    lines += [f"{k},{k * args.bin!r},{int(c)}" for k, c in enumerate(vol.tolist())]
    return "\n".join(lines) + "\n"


def cmd_rank(args):
    alpha_star = _alpha_star(args.alpha_star)
    log = _require_input(args)
    bau = _window(args, "bau_start", "bau_end", "business-as-usual")
    A = build_adjacency(log, bau)
    b = basal_rates(log, bau)
    rho = spectral_radius(A).rho
    sstar = steady_state(A, b, alpha_star, rho=rho)
    if args.scores_out:
        _write(args.scores_out, scores_to_csv(sstar, log.users))
    if args.adjacency_out:
        _write(args.adjacency_out, adjacency_to_csv(A, log.users))
    ranking = rank_users(sstar, args.top)
    if ranking.short:
        print(f"warning: only {len(ranking)} users available for --top {args.top}", file=sys.stderr)
    return ranking.to_csv(log.users)


def _spike_window(args, log, bau_end):
    if args.spike_start is not None or args.spike_end is not None:
        return _window(args, "spike_start", "spike_end", "spike")
    vol = volume_series(log, args.bin)
    first = int(math.ceil(bau_end / args.bin))
    if first >= vol.size:
        raise UsageError("no activity after the business-as-usual window to detect a spike in")
    peak, end, reached = detect_spike(vol[first:], args.decay_factor)
    if not reached:
        print("warning: activity never decayed by the requested factor; spike runs to the end of the log",
              file=sys.stderr)
    return (first + peak) * args.bin, (first + max(end, peak + 1)) * args.bin


def cmd_sweep(args):
    log = _require_input(args)
    bau = _window(args, "bau_start", "bau_end", "business-as-usual")
    spike = _spike_window(args, log, bau[1])
    if bau[1] > spike[0]:
        raise UsageError("business-as-usual window must end before the spike starts")
    if args.grid in (None, "default"):
        grid = default_grid()
    else:
        grid = _float_list(args.grid, "--grid")
        bad = [g for g in grid if not 0 <= g < 1]
        if bad:
            raise UsageError(f"--grid values must satisfy 0 <= alpha_star < 1, got {bad}")
    result = evaluate_spike(log, bau, spike, grid, r=args.top)
    if result.empty_graph:
        print("warning: no edges in the business-as-usual window; all rankings are basal", file=sys.stderr)
    return result.to_csv()


def cmd_simulate(args):
    alpha_star = _alpha_star(args.alpha_star)
    if args.steps < 1:
        raise UsageError(f"--steps must be >= 1, got {args.steps}")
    if not 0 <= args.boost <= 1:
        raise UsageError(f"--boost must satisfy 0 <= boost <= 1, got {args.boost}")
    if args.b_scale < 0:
        raise UsageError(f"--b-scale must be non-negative, got {args.b_scale}")
    log = _require_input(args)
    bau = _window(args, "bau_start", "bau_end", "business-as-usual")
    A = build_adjacency(log, bau)
    b = basal_rates(log, bau) * args.b_scale
    if args.mode == "sample" and b.max(initial=0.0) > 1:
        raise UsageError(f"--b-scale makes basal probabilities exceed 1 (max {b.max():g}); lower it")
    rho = spectral_radius(A).rho
    params = ModelParams.from_alpha_star(alpha_star, b, rho)
    init_seed, run_seed = np.random.SeedSequence(args.seed).spawn(2)
    s0 = np.zeros(A.n, dtype=np.int8)
    forced = int(round(args.boost * A.n))
    if forced:
        s0[np.random.default_rng(init_seed).choice(A.n, size=forced, replace=False)] = 1
    if args.mode == "sample":
        traj = simulate(A, params, s0, args.steps, run_seed)
    else:
        traj = expected_iteration(A, params, s0.astype(np.float64), args.steps)
    if args.wide:
        _write(args.wide, traj.to_wide_csv(list(log.users)))
    return traj.to_csv()


def cmd_synth(args):
    if args.out is None:
        raise UsageError("synth needs --out (a metadata sidecar is written next to it)")
    params = {}
    if args.family == "k_regular_ring":
        params["k"] = args.k
    elif args.family == "erdos_renyi":
        params["p"] = args.p
    else:
        params["hubs"] = args.hubs
    try:
        config = SynthConfig(
            family=args.family, n=args.n, params=params,
            alpha_star_true=0.5 if args.alpha_star is None else args.alpha_star,
            b_scale=args.b_scale, bau_bins=args.bau_bins, spike_bins=args.spike_bins,
            spike_boost=args.boost, seed=args.seed, bin_width=args.bin,
        )
        _, _, out = generate(config)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write(args.out, serialize_events(out.log))
    _write(args.out + ".meta", format_metadata(out.metadata))
    return None


def cmd_responsiveness(args):
    if not args.lookback > 0:
        raise UsageError(f"--lookback must be positive, got {args.lookback}")
    log = _require_input(args)
    resp = responsiveness(log, args.bin, args.lookback)
    sends = volume_series(log, args.bin)
    lines = ["bin,start,sends,responsiveness"]
    for k, (n_sent, value) in enumerate(zip(sends.tolist(), resp.tolist())):
        shown = "" if math.isnan(value) else repr(value)
        lines.append(f"{k},{k * args.bin!r},{n_sent},{shown}")
    return "\n".join(lines) + "\n"


def cmd_halflife(args):
    if args.alpha is not None or args.lambda1 is not None:
        if args.alpha is None or args.lambda1 is None:
            raise UsageError("--alpha and --lambda1 must be given together")
        gamma = args.alpha * args.lambda1
        if not 0 < gamma < 1:
            raise UsageError(f"alpha * lambda1 must satisfy 0 < gamma < 1, got {gamma}")
        return f"gamma,half_life\n{gamma!r},{half_life(args.alpha, args.lambda1)!r}\n"
    if args.values is not None:
        segment = _float_list(args.values, "--values")
    else:
        log = _require_input(args)
        vol = volume_series(log, args.bin)
        if args.segment_start is not None or args.segment_end is not None:
            t0, t1 = _window(args, "segment_start", "segment_end", "fit segment")
            segment = vol[int(t0 // args.bin):int(math.ceil(t1 / args.bin))]
        else:
            peak, end, _ = detect_spike(vol, args.decay_factor)
            segment = vol[peak:end + 1]
    if len(segment) < 3:
        raise UsageError(f"the fit needs at least 3 bins, got {len(segment)}")
    if min(segment) <= 0:
        raise UsageError("the fit segment contains empty bins; choose a segment with positive volume")
    fit = fit_decay(segment)
    return f"gamma,half_life,decaying\n{fit.gamma!r},{fit.half_life!r},{int(fit.decaying)}\n"


COMMANDS = {
    "volume": cmd_volume,
    "rank": cmd_rank,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "synth": cmd_synth,
    "responsiveness": cmd_responsiveness,
    "halflife": cmd_halflife,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="event CSV (time,sender,receiver)")
    common.add_argument("--out", help="output CSV path (default: stdout)")
    common.add_argument("--bin", type=float, default=60.0, help="bin width in seconds (default 60)")
    common.add_argument("--seed", type=int, default=0)

    windows = argparse.ArgumentParser(add_help=False)
    for name in ("bau-start", "bau-end", "spike-start", "spike-end"):
        windows.add_argument(f"--{name}", type=float, help="minutes")
    windows.add_argument("--alpha-star", type=float, help="normalized response rate in [0, 1)")
    windows.add_argument("--grid", help="comma-separated alpha_star values, or 'default'")
    windows.add_argument("--top", type=int, default=100, help="cohort size r (default 100)")
    windows.add_argument("--decay-factor", type=float, default=4.0)

    parser = argparse.ArgumentParser(prog="spikerank", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    parents = [common, windows]

    sub.add_parser("volume", parents=parents, help="events per bin")
    p = sub.add_parser("rank", parents=parents, help="top users by steady-state activity")
    p.add_argument("--scores-out", help="also write every user's score (user,score)")
    p.add_argument("--adjacency-out", help="also write the business-as-usual adjacency (receiver,sender)")
    sub.add_parser("sweep", parents=parents, help="spike activity of the top r across alpha_star")

    p = sub.add_parser("simulate", parents=parents, help="run the activity model on a log's network")
    p.add_argument("--steps", type=int, default=60)
    p.add_argument("--b-scale", type=float, default=None, required=True,
                   help="factor turning business-as-usual counts into per-bin probabilities")
    p.add_argument("--boost", type=float, default=0.0, help="fraction of users forced active at step 0")
    p.add_argument("--mode", choices=("sample", "expected"), default="sample")
    p.add_argument("--wide", help="also write per-user states")

    p = sub.add_parser("synth", parents=parents, help="generate a synthetic spike log")
    p.add_argument("--family", choices=FAMILIES, default="erdos_renyi")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", type=int, default=4, help="ring degree")
    p.add_argument("--p", type=float, default=0.005, help="edge probability")
    p.add_argument("--hubs", type=int, default=1)
    p.add_argument("--b-scale", type=float, default=0.01)
    p.add_argument("--bau-bins", type=int, default=300)
    p.add_argument("--spike-bins", type=int, default=5)
    p.add_argument("--boost", type=float, default=0.5)

    p = sub.add_parser("responsiveness", parents=parents, help="mean messages seen before each send, per bin")
    p.add_argument("--lookback", type=float, default=60.0, help="seconds")

    p = sub.add_parser("halflife", parents=parents, help="spike half-life from rates or a volume fit")
    p.add_argument("--alpha", type=float)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--values", help="comma-separated volumes to fit")
    p.add_argument("--segment-start", type=float, help="minutes")
    p.add_argument("--segment-end", type=float, help="minutes")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.bin > 0:
        parser.error(f"--bin must be positive, got {args.bin}")
    if getattr(args, "top", 1) < 1:
        parser.error(f"--top must be >= 1, got {args.top}")
    try:
        text = COMMANDS[args.command](args)
        if text is not None:
            _write(args.out, text)
    except UsageError as exc:
        parser.error(str(exc))
    except (ParseError, DomainError, ConvergenceError, OSError, ValueError) as exc:
        print(f"spikerank {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0
