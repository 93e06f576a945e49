"""Command-line client for the simulation service.

Every subcommand goes through the HTTP interface: against a remote
instance when --server is given, otherwise against an in-process
application (no network, same code path). Exit codes: 0 success,
1 runtime failure or regression tripwire, 2 invalid configuration.
"""

from __future__ import annotations

import asyncio
import json
import sys
from pathlib import Path

import click
import httpx
import yaml

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _call(server: str | None, path: str, payload: dict) -> httpx.Response:
    if server is None:
        from .service.app import create_app

        transport = httpx.ASGITransport(app=create_app())

        async def go() -> httpx.Response:
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://combpilot.local",
                                         timeout=None) as client:
                return await client.post(path, json=payload)

        return asyncio.run(go())
    with httpx.Client(base_url=server, timeout=None) as client:
        return client.post(path, json=payload)


def _fail_from_response(resp: httpx.Response) -> None:
    """Print a diagnostic and exit; 422 means the request was invalid."""
    try:
        detail = resp.json().get("detail")
    except ValueError:
        detail = resp.text
    if isinstance(detail, list):  # pydantic validation errors
        for err in detail:
            loc = ".".join(str(part) for part in err.get("loc", []) if part != "body")
            click.echo(f"config error at '{loc}': {err.get('msg')}", err=True)
    else:
        click.echo(f"error: {detail}", err=True)
    sys.exit(EXIT_CONFIG if resp.status_code == 422 else EXIT_RUNTIME)


def _post_or_die(server: str | None, path: str, payload: dict) -> dict:
    try:
        resp = _call(server, path, payload)
    except httpx.HTTPError as exc:
        click.echo(f"service unreachable: {exc}", err=True)
        sys.exit(EXIT_RUNTIME)
    if resp.status_code != 200:
        _fail_from_response(resp)
    return resp.json()


def _format_subset(indices) -> str:
    return "{" + ",".join(str(i) for i in indices) + "}"


@click.group()
@click.option("--server", default=None, metavar="URL",
              help="Base URL of a running combpilot service; default is in-process.")
@click.pass_context
def main(ctx, server):
    """Pilot placement and phase-noise tracking experiments."""
    ctx.obj = server


@main.command()
@click.option("-L", "--channels", "n_channels", type=int, required=True)
@click.option("-D", "--refs", "d", type=int, required=True)
@click.option("--closed-form", "method", flag_value="closed_form")
@click.option("--brute-force", "method", flag_value="brute_force")
@click.option("--both", "method", flag_value="both", default=True)
@click.option("--table", "table_path", type=click.Path(dir_okay=False), default=None,
              help="Also write subset -> criterion CSV for all subsets.")
@click.pass_obj
def optimize(server, n_channels, d, method, table_path):
    """Best reference channels for L comb lines and D references."""
    payload = {"n_channels": n_channels, "d": d, "method": method,
               "include_table": table_path is not None}
    data = _post_or_die(server, "/optimize", payload)
    for key in ("closed_form", "brute_force"):
        if data.get(key):
            click.echo(f"{_format_subset(data[key]['indices'])}  {data[key]['criterion']:.6f}")
    if table_path is not None:
        lines = ["dset,criterion"]
        lines += [f"\"{_format_subset(e['indices'])}\",{e['criterion']!r}"
                  for e in data["table"]]
        Path(table_path).write_text("\n".join(lines) + "\n")
        click.echo(f"wrote {table_path}", err=True)
    if data.get("agree") is False:
        click.echo("closed-form and brute-force optima disagree", err=True)
        sys.exit(EXIT_RUNTIME)


@main.command("calibrate-snr")
@click.option("--order", type=click.Choice(["4", "16", "64"]), default="64")
@click.option("--target-ber", type=float, default=1e-3, show_default=True)
@click.pass_obj
def calibrate_snr_cmd(server, order, target_ber):
    """Es/N0 (dB) at which the analytic BER hits the target."""
    data = _post_or_die(server, "/calibrate-snr",
                        {"order": int(order), "target_ber": target_ber})
    click.echo(f"{data['snr_db']:.6f}")


def _write_outputs(data: dict, out_dir: str) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(data["csv"])
    summary = {
        "config_hash": data["config_hash"],
        "config": data["resolved_config"],
        "rows": data["rows"],
    }
    (out / "results.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    click.echo(f"wrote {out / 'results.csv'} and {out / 'results.json'} "
               f"({len(data['rows'])} rows)", err=True)


def _run_config(server, cfg: dict, out_dir: str) -> None:
    data = _post_or_die(server, "/simulate", cfg)
    _write_outputs(data, out_dir)


@main.command()
@click.argument("config_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", default="results", show_default=True)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--trials", type=int, default=None, help="Override the trial count.")
@click.option("--workers", type=int, default=None, help="Override the worker count.")
@click.pass_obj
def simulate(server, config_file, out_dir, seed, trials, workers):
    """Run the experiment described by a YAML/JSON config file."""
    try:
        cfg = yaml.safe_load(Path(config_file).read_text())
    except yaml.YAMLError as exc:
        click.echo(f"cannot parse {config_file}: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if not isinstance(cfg, dict):
        click.echo(f"config {config_file} must be a mapping", err=True)
        sys.exit(EXIT_CONFIG)
    if seed is not None:
        cfg["seed"] = seed
    if trials is not None:
        cfg["trials"] = trials
    if workers is not None:
        cfg["workers"] = workers
    _run_config(server, cfg, out_dir)


def _parse_scheme(text: str) -> dict:
    """'wdt', 'rat:2', 'rat:half', 'rat:full' or 'rat:-3,3' (explicit set)."""
    if text == "wdt":
        return {"kind": "wdt"}
    if text.startswith("rat:"):
        arg = text[4:]
        if arg in ("half", "full"):
            return {"kind": "rat", "d": arg}
        try:
            return {"kind": "rat", "d": int(arg)}
        except ValueError:
            pass
        try:
            return {"kind": "rat", "indices": [int(p) for p in arg.split(",")]}
        except ValueError:
            pass
    raise click.BadParameter(f"cannot parse scheme {text!r}")


def _base_options(fn):
    for deco in (
        click.option("--pilot-rate", type=float, default=0.01, show_default=True),
        click.option("--n-symbols", type=int, default=20_000, show_default=True),
        click.option("--dnuc", type=float, default=100e3, show_default=True,
                     help="CW laser linewidth, Hz."),
        click.option("--symbol-rate", type=float, default=20e9, show_default=True),
        click.option("--snr-db", type=float, default=None,
                     help="Fix Es/N0 instead of calibrating to the target BER."),
        click.option("--target-ber", type=float, default=1e-3, show_default=True),
        click.option("--order", type=click.Choice(["4", "16", "64"]), default="64"),
        click.option("--trials", type=int, default=10, show_default=True),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--workers", type=int, default=1, show_default=True),
        click.option("--out", "out_dir", default="results", show_default=True),
    ):
        fn = deco(fn)
    return fn


def _build_config(sweep: dict, schemes, **kw) -> dict:
    snr = ({"mode": "fixed", "snr_db": kw["snr_db"]} if kw["snr_db"] is not None
           else {"mode": "calibrated", "target_ber": kw["target_ber"]})
    return {
        "base": {
            "n_channels": kw["n_channels"],
            "delta_nu_c": kw["dnuc"],
            "delta_nu_r": kw["dnur"],
            "symbol_rate": kw["symbol_rate"],
            "n_symbols": kw["n_symbols"],
            "pilot_rate": kw["pilot_rate"],
        },
        "snr": snr,
        "sweep": sweep,
        "schemes": [_parse_scheme(s) for s in schemes],
        "trials": kw["trials"],
        "seed": kw["seed"],
        "modulation_order": int(kw["order"]),
        "workers": kw["workers"],
    }


@main.group()
def sweep():
    """Run a sweep described by flags instead of a config file."""


@sweep.command("channels")
@click.option("-L", "--channels", "channel_counts", type=int, multiple=True, required=True)
@click.option("--scheme", "schemes", multiple=True, required=True,
              help="Repeatable: wdt, rat:2, rat:half, rat:full, rat:-3,3")
@click.option("--dnur", type=float, default=100.0, show_default=True,
              help="RF oscillator linewidth, Hz.")
@_base_options
@click.pass_obj
def sweep_channels_cmd(server, channel_counts, schemes, dnur, out_dir, **kw):
    """BER versus the number of comb lines."""
    cfg = _build_config({"channel_counts": list(channel_counts)}, schemes,
                        n_channels=channel_counts[0], dnur=dnur, **kw)
    _run_config(server, cfg, out_dir)


@sweep.command("linewidth")
@click.option("--dnur", "linewidths", type=float, multiple=True, required=True,
              help="Repeatable: RF oscillator linewidths to sweep, Hz.")
@click.option("-L", "--channels", "n_channels", type=int, default=51, show_default=True)
@click.option("--scheme", "schemes", multiple=True, required=True)
@_base_options
@click.pass_obj
def sweep_linewidth_cmd(server, linewidths, n_channels, schemes, out_dir, **kw):
    """BER versus the RF oscillator linewidth."""
    cfg = _build_config({"linewidths_r": list(linewidths)}, schemes,
                        n_channels=n_channels, dnur=linewidths[0], **kw)
    _run_config(server, cfg, out_dir)


@sweep.command("subsets")
@click.option("-L", "--channels", "n_channels", type=int, required=True)
@click.option("-D", "--refs", "d", type=int, required=True)
@click.option("--dnur", type=float, default=100.0, show_default=True)
@_base_options
@click.pass_obj
def sweep_subsets_cmd(server, n_channels, d, dnur, out_dir, **kw):
    """Realized estimation error for every size-D reference subset."""
    cfg = _build_config({"subset_scan_d": d}, (), n_channels=n_channels, dnur=dnur, **kw)
    _run_config(server, cfg, out_dir)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
