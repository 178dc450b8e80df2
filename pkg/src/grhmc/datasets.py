"""CSV dataset ingestion for the logistic regression targets.

Real benchmark data cannot be redistributed here, so the package bundles
deterministic synthetic stand-ins with the same shapes as the classic
binary-classification sets (532 x 8 and 1000 x 25 after encoding, both
including the intercept column). ``synthesize_*`` regenerates them.
"""
from __future__ import annotations

import importlib.resources
from pathlib import Path

import numpy as np
import pandas as pd

from .targets import LogisticRegressionData

_BUNDLED = {
    "pima": "pima_synthetic.csv",
    "german_credit": "german_credit_synthetic.csv",
}


def bundled_dataset_path(name: str) -> Path:
    """Filesystem path of a bundled dataset ('pima' or 'german_credit')."""
    try:
        fname = _BUNDLED[name]
    except KeyError:
        raise ValueError(f"unknown bundled dataset {name!r}; choose from {sorted(_BUNDLED)}")
    return Path(importlib.resources.files("grhmc").joinpath("data", fname))


def load_csv_dataset(
    path,
    response_column: str,
    standardize: bool = True,
    prior_variance: float = 100.0,
) -> LogisticRegressionData:
    """Read a delimited table into a logistic-regression dataset.

    Categorical covariates are one-hot encoded with the first level
    dropped; continuous covariates are centered and scaled to unit
    variance when ``standardize`` is set. An intercept column of ones is
    prepended.

    Args:
        path: CSV file with a header row.
        response_column: Name of the binary response column. Accepts 0/1
            values or any two-level column (levels are mapped to 0/1 in
            sorted order).
        standardize: Standardize continuous covariates.
        prior_variance: Gaussian prior variance on the coefficients.

    Raises:
        FileNotFoundError: missing file.
        ValueError: non-binary response or rank-deficient design.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    df = pd.read_csv(path)
    if response_column not in df.columns:
        raise ValueError(f"response column {response_column!r} not in {list(df.columns)}")

    resp = df[response_column]
    levels = sorted(resp.dropna().unique().tolist())
    if len(levels) != 2:
        raise ValueError(f"response must have exactly 2 levels, got {levels}")
    y = (resp == levels[1]).to_numpy(dtype=float)

    cov = df.drop(columns=[response_column])
    numeric = cov.select_dtypes(include=[np.number])
    categorical = cov.drop(columns=numeric.columns)

    blocks = [np.ones((len(df), 1))]
    if len(numeric.columns) > 0:
        Xn = numeric.to_numpy(dtype=float)
        if standardize:
            mean = Xn.mean(axis=0)
            sd = Xn.std(axis=0, ddof=0)
            sd[sd == 0] = 1.0
            Xn = (Xn - mean) / sd
        blocks.append(Xn)
    if len(categorical.columns) > 0:
        dummies = pd.get_dummies(categorical.astype("category"), drop_first=True)
        blocks.append(dummies.to_numpy(dtype=float))
    X = np.hstack(blocks)
    return LogisticRegressionData(X=X, y=y, prior_variance=prior_variance)


def synthesize_pima_like(seed: int = 20240317) -> pd.DataFrame:
    """532 rows, 7 numeric covariates and a 0/1 response (diabetes-style shape)."""
    rng = np.random.default_rng(seed)
    n = 532
    npreg = rng.poisson(3.0, n).astype(float)
    age = rng.gamma(7.0, 4.5, n) + 21.0
    glu = rng.normal(121.0, 30.0, n)
    bp = rng.normal(71.0, 11.0, n)
    skin = rng.gamma(8.0, 3.7, n)
    bmi = rng.normal(32.0, 6.0, n)
    ped = rng.gamma(2.0, 0.22, n)
    z = (
        -9.5
        + 0.035 * glu
        + 0.08 * bmi
        + 1.1 * ped
        + 0.03 * age
        + 0.08 * npreg
        - 0.005 * bp
        + 0.01 * skin
    )
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(int)
    return pd.DataFrame(
        {
            "npreg": npreg,
            "glu": glu,
            "bp": bp,
            "skin": skin,
            "bmi": bmi,
            "ped": ped,
            "age": age,
            "type": y,
        }
    )


def synthesize_credit_like(seed: int = 20240318) -> pd.DataFrame:
    """1000 rows mixing numeric and categorical covariates.

    One-hot encoding (drop first) plus intercept yields a 1000 x 25
    design: 10 numeric columns and 6 categoricals with 4+4+4+3+3+2 levels.
    """
    rng = np.random.default_rng(seed)
    n = 1000

    def cat(levels, probs):
        return rng.choice(levels, size=n, p=probs)

    numeric = {
        "duration": rng.gamma(4.0, 5.2, n),
        "amount": rng.lognormal(7.8, 0.9, n),
        "rate": rng.integers(1, 5, n).astype(float),
        "residence": rng.integers(1, 5, n).astype(float),
        "age": rng.gamma(9.0, 4.0, n) + 19.0,
        "existing_credits": rng.poisson(1.4, n).astype(float) + 1.0,
        "dependents": rng.binomial(1, 0.15, n).astype(float) + 1.0,
        "savings_score": rng.normal(0.0, 1.0, n),
        "employment_years": rng.gamma(2.5, 3.0, n),
        "installment_burden": rng.beta(2.0, 5.0, n),
    }
    categorical = {
        "checking_status": cat(["none", "low", "medium", "high"], [0.4, 0.27, 0.18, 0.15]),
        "credit_history": cat(["critical", "delayed", "existing_paid", "all_paid"], [0.3, 0.1, 0.5, 0.1]),
        "purpose": cat(["car", "furniture", "radio_tv", "other"], [0.33, 0.18, 0.28, 0.21]),
        "personal_status": cat(["single", "married", "divorced"], [0.55, 0.3, 0.15]),
        "housing": cat(["own", "rent", "free"], [0.71, 0.18, 0.11]),
        "foreign_worker": cat(["yes", "no"], [0.96, 0.04]),
    }
    z = (
        -0.6
        + 0.02 * (numeric["duration"] - 21.0)
        + 0.00012 * (numeric["amount"] - 3000.0)
        - 0.02 * (numeric["age"] - 35.0)
        - 0.4 * numeric["savings_score"]
        + 0.9 * (categorical["checking_status"] == "none")
        - 0.6 * (categorical["credit_history"] == "all_paid")
        + 0.4 * (categorical["housing"] == "rent")
    )
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-z))).astype(int)
    frame = {}
    frame.update(numeric)
    frame.update(categorical)
    frame["bad_credit"] = y
    return pd.DataFrame(frame)


def write_bundled_datasets(out_dir) -> list[Path]:
    """Regenerate the bundled synthetic CSVs into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, frame in (
        ("pima", synthesize_pima_like()),
        ("german_credit", synthesize_credit_like()),
    ):
        p = out_dir / _BUNDLED[name]
        frame.to_csv(p, index=False)
        paths.append(p)
    return paths
