"""Write the UCI Pima diabetes and Statlog German credit sets as LIBSVM files.

The raw tables come from the ``keel-ds`` wheel (``pip install keel-ds``), which
bundles both.  Usage::

    python scripts/make_datasets.py data/
"""

import os
import sys

import keel_ds

# german.dat columns: 13 categorical (A-codes) and 7 numeric, then class 1/2
GERMAN_NUMERIC = {1, 4, 7, 10, 12, 15, 17}


def _raw(name):
    path = os.path.join(os.path.dirname(keel_ds.__file__), "data", "balanced", "raw", name)
    with open(path) as fh:
        return [[c.strip() for c in line.split(",")] for line in fh if line.strip()]


def _write(path, rows):
    with open(path, "w") as fh:
        for label, feats in rows:
            body = " ".join(f"{i}:{v}" for i, v in enumerate(feats, 1) if float(v) != 0.0)
            fh.write(f"{label:+d} {body}\n".rstrip() + "\n")


def diabetes():
    rows = []
    for rec in _raw("pima.dat"):
        label = 1 if rec[-1] == "tested_positive" else -1
        rows.append((label, rec[:-1]))
    return rows


def german(one_hot=False):
    """Numeric columns kept raw; each A-code ``A<col><k>`` becomes the integer ``k + 1``.

    The integer coding follows the numeric variant distributed on the LIBSVM
    site.  ``one_hot=True`` expands the codes into indicator columns instead.
    """
    recs = _raw("german.dat")
    ncol = len(recs[0]) - 1
    levels = {j: sorted({r[j] for r in recs}) for j in range(ncol) if j not in GERMAN_NUMERIC}
    rows = []
    for rec in recs:
        feats = []
        for j in range(ncol):
            if j in GERMAN_NUMERIC:
                feats.append(rec[j])
            elif one_hot:
                feats.extend("1" if rec[j] == lv else "0" for lv in levels[j])
            else:
                feats.append(str(int(rec[j][len(f"A{j + 1}"):]) + 1))
        # class 1 = good credit
        rows.append((1 if rec[-1] == "1" else -1, feats))
    return rows

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "data"
    os.makedirs(out, exist_ok=True)
    _write(os.path.join(out, "diabetes"), diabetes())
    _write(os.path.join(out, "german"), german())
    _write(os.path.join(out, "german_onehot"), german(one_hot=True))
