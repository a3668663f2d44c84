"""Generators and reference maps shared by the test modules."""
import numpy as np

from debtrank import BankRecord, ExposureMatrix, build_system


def system_from_exposures(a, equity, external_assets=None, ids=None):
    a = np.asarray(a, dtype=float)
    e = np.asarray(equity, dtype=float)
    n = len(e)
    ext = np.ones(n) if external_assets is None else np.asarray(external_assets, dtype=float)
    ids = ids or [f"B{k:03d}" for k in range(n)]
    records = [
        BankRecord(
            id=ids[k],
            name=f"bank {k}",
            equity0=float(e[k]),
            external_assets=float(ext[k]),
            external_liabilities=0.0,
            interbank_assets_total=float(a[k].sum()),
            interbank_liabilities_total=float(a[:, k].sum()),
        )
        for k in range(n)
    ]
    return build_system(records, ExposureMatrix(a))


def system_from_leverage(lam, equity=None, **kw):
    lam = np.asarray(lam, dtype=float)
    e = np.ones(len(lam)) if equity is None else np.asarray(equity, dtype=float)
    return system_from_exposures(lam * e[:, None], e, **kw)


def true_radius(m):
    return float(np.max(np.abs(np.linalg.eigvals(m)))) if len(m) else 0.0


def random_exposures(rng, n, link_density=0.3):
    a = rng.lognormal(0.0, 1.0, (n, n)) * (rng.random((n, n)) < link_density)
    np.fill_diagonal(a, 0.0)
    return a


def random_system(rng, n, target_rho=None, link_density=0.3, min_radius=1e-3):
    """Random system; with ``target_rho`` exposures are scaled to hit that spectral radius."""
    for _ in range(1000):
        a = random_exposures(rng, n, link_density)
        e = rng.lognormal(0.0, 0.7, n)
        lam = a / e[:, None]
        rho = true_radius(lam)
        if target_rho is None:
            return system_from_exposures(a, e)
        if rho > min_radius:
            return system_from_exposures(a * (target_rho / rho), e)
    raise RuntimeError("could not draw a non-nilpotent system")


def random_tree_system(rng, n, max_weight=1.0):
    """Randomly oriented random recursive tree, leverage entries in (0, max_weight]."""
    lam = np.zeros((n, n))
    for k in range(1, n):
        parent = int(rng.integers(k))
        w = rng.uniform(0.05, max_weight)
        if rng.random() < 0.5:
            lam[k, parent] = w
        else:
            lam[parent, k] = w
    e = rng.lognormal(0.0, 0.7, n)
    return system_from_leverage(lam, e)


def double_counting_map(lam, h1, steps):
    """Banks pass on their full loss at every step: ``h <- min(1, h + lam h)``."""
    h = np.array(h1, dtype=float)
    for _ in range(steps - 1):
        h = np.minimum(1.0, h + lam @ h)
    return h


def original_debtrank_loop(lam, h1, max_steps=10_000):
    """Plain-loop version of the once-only propagation rule."""
    n = len(h1)
    w = [[min(1.0, lam[i][j]) for j in range(n)] for i in range(n)]
    h = [float(x) for x in h1]
    prev = [0.0] * n
    for _ in range(max_steps):
        fresh = [j for j in range(n) if h[j] > 0 and prev[j] == 0]
        if not fresh:
            break
        new = [min(1.0, h[i] + sum(w[i][j] * h[j] for j in fresh)) for i in range(n)]
        prev, h = h, new
    return np.array(h)


def synthetic_records(rng, n, equity_ratio=0.06, interbank_share=0.12, spread=0.2, prefix="B"):
    """Balance sheets for ``n`` banks with near-uniform interbank totals.

    ``spread`` controls the heterogeneity of interbank assets and
    liabilities; small values keep every bank likely to receive links at
    a 5% target density.
    """
    records = []
    for k in range(n):
        ext_a = rng.lognormal(4.0, 1.0)
        # interbank books sit near a common size so fitness stays close to uniform
        ib_a = 10.0 * interbank_share * rng.uniform(1 - spread, 1 + spread)
        ib_l = 10.0 * interbank_share * rng.uniform(1 - spread, 1 + spread)
        ta = ext_a + ib_a
        eq = ta * equity_ratio * rng.uniform(0.7, 1.3)
        records.append(
            BankRecord(
                id=f"{prefix}{k:03d}",
                name=f"Synthetic bank {k}",
                equity0=eq,
                external_assets=ext_a,
                external_liabilities=max(ta - eq - ib_l, 0.0),
                interbank_assets_total=ib_a,
                interbank_liabilities_total=ib_l,
                total_assets=ta,
            )
        )
    return records


def uniform_total_records(rng, n, equity_ratio=0.06, interbank_share=0.12):
    """Synthetic banks whose interbank totals are all equal (uniform fitness)."""
    records = []
    for k in range(n):
        eq = equity_ratio * rng.uniform(0.7, 1.3) * 100
        records.append(
            BankRecord(
                id=f"U{k:03d}",
                name=f"Uniform bank {k}",
                equity0=eq,
                external_assets=100 * (1 - interbank_share),
                external_liabilities=0.0,
                interbank_assets_total=100 * interbank_share,
                interbank_liabilities_total=100 * interbank_share,
            )
        )
    return records


TWO_BANK_CSV = """bank_id,name,equity,external_assets,external_liabilities,interbank_assets,interbank_liabilities,total_assets
B1,First Bank,10,100,91,5,4,105
B2,Second Bank,20,50,29,4,5,54
"""

TWO_BANK_EDGES = """lender_id,borrower_id,exposure
B1,B2,5
B2,B1,4
"""


def write_balance_csv(path, records):
    lines = ["bank_id,name,equity,external_assets,external_liabilities,interbank_assets,interbank_liabilities,total_assets"]
    for r in records:
        lines.append(",".join([r.id, r.name] + [repr(float(x)) for x in (
            r.equity0, r.external_assets, r.external_liabilities,
            r.interbank_assets_total, r.interbank_liabilities_total, r.total_assets)]))
    path.write_text("\n".join(lines) + "\n")
    return path
