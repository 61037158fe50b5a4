#!/usr/bin/env python3
"""Recompute precision / recall / F-measure from recorded retrieval sets.

Reads a JSON array of {"id", "department", "retrieved", "relevant"} records and
prints, per department and overall, micro metrics (pooled counts) and macro
metrics (mean of the defined per-query values), as 4-decimal strings rounded
half-to-even from exact rational arithmetic. Undefined values are null.

Usage: scripts/metric_oracle.py fixtures/micro-recorded.json > fixtures/micro-expected.json
"""
import json
import sys
from decimal import Decimal
from fractions import Fraction


def fmt(x):
    if x is None:
        return None
    scaled = Fraction(x.numerator * 10**4, x.denominator)
    whole, frac = divmod(scaled.numerator, scaled.denominator)
    frac = Fraction(frac, scaled.denominator)
    if frac > Fraction(1, 2) or (frac == Fraction(1, 2) and whole % 2 == 1):
        whole += 1
    return str((Decimal(whole) / Decimal(10**4)).quantize(Decimal("0.0001")))


def ratio(a, b):
    return Fraction(a, b) if b else None


def harmonic(p, r):
    if p is None or r is None or p + r == 0:
        return None
    return 2 * p * r / (p + r)


def mean(xs):
    xs = [x for x in xs if x is not None]
    return sum(xs, Fraction(0)) / len(xs) if xs else None


def cell(records):
    hits = retrieved = relevant = 0
    ps, rs, fs = [], [], []
    for rec in records:
        got, want = set(rec["retrieved"]), set(rec["relevant"])
        h = len(got & want)
        hits, retrieved, relevant = hits + h, retrieved + len(got), relevant + len(want)
        p, r = ratio(h, len(got)), ratio(h, len(want))
        ps.append(p)
        rs.append(r)
        fs.append(harmonic(p, r))
    mp, mr = ratio(hits, retrieved), ratio(hits, relevant)
    return {
        "queries": len(records),
        "hit_total": hits,
        "retrieved_total": retrieved,
        "relevant_total": relevant,
        "micro": {"precision": fmt(mp), "recall": fmt(mr), "f_measure": fmt(harmonic(mp, mr))},
        "macro": {"precision": fmt(mean(ps)), "recall": fmt(mean(rs)), "f_measure": fmt(mean(fs))},
    }


def main():
    with open(sys.argv[1]) as f:
        records = json.load(f)
    departments = sorted({r["department"] for r in records})
    out = {
        "per_department": {d: cell([r for r in records if r["department"] == d]) for d in departments},
        "overall": cell(records),
    }
    json.dump(out, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
