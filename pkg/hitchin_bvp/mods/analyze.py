#!/usr/bin/env python3

import json
from pathlib import Path

from ..utils.errors import ConfigError, NotStable
from ..utils.exterior import KVector
from ..utils.hitchin import analyze, hitchin_invariant
from ..utils.logging import Log
from ..utils.reporting import build_report, save_json_report


def read_form(text):
    """A JSON form literal, or `@path` naming a file that holds one."""
    if text.startswith("@"):
        path = Path(text[1:])
        if not path.is_file():
            raise ConfigError(f"form file {path} does not exist", path=str(path))
        text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"form literal is not valid JSON: {e}") from e
    form = KVector.from_json(data)
    if form.grade != 3:
        raise ConfigError(f"analyze needs a 3-form, got grade {form.grade}", grade=form.grade)
    return data, form


def analyze_form(psi):
    """Report body for one 3-form; an unstable form is a result, not an error."""
    try:
        result = analyze(psi)
    except NotStable:
        lam, _ = hitchin_invariant(psi)
        return {"lambda": lam, "stable": False, "vol_density": 0, "P_coeffs": None, "I_matrix": None,
                "exact": psi.exact}
    return result.to_dict()


def run(args):
    config = args.config
    literal, psi = read_form(args.form)
    Log.header("Stable form analysis")
    body = analyze_form(psi)
    if body["stable"]:
        Log.success("Form is complex-stable", lam=float(body["lambda"]), exact=body["exact"])
    else:
        Log.warn("Form is not complex-stable", lam=float(body["lambda"]))

    report = build_report(config, body, inputs=literal)
    out = Path(args.out or config.report_json or Path(config.out_dir) / "analyze.json")
    save_json_report(out, report)
    return report
