"""Where does misclassification come from in the seven-group design?

Feeds the greedy classifier progressively more oracle information and
compares it with a nearest-true-centre assignment of the same vectors:

  pipeline     estimated beta, cross-fitted factor space (the estimator)
  true-beta    true beta, cross-fitted factor space
  oracle-F     true beta, true factor space (orthonormal basis of alpha)
  nearest      oracle-F vectors assigned to the nearest true group centre

    python3 scripts/classification_diagnostics.py --N 100 --T 20 --reps 50
"""

import argparse

import numpy as np

from spectral_panel.classify import classify, find_lambda_hat, leading_eigvecs, make_split
from spectral_panel.dgp import DgpConfig, generate_dgp
from spectral_panel.panel import RngSpec, residuals
from spectral_panel.simulate import misclassification_rate


def _true_beta_cross_fit(panel, beta, split, g):
    n, t = panel.n_units, panel.n_periods
    r = residuals(panel, beta)
    a = np.empty((n, t))
    for which in (0, 1):
        fit_units, targets = split.half(which), split.half(1 - which)
        f = leading_eigvecs((2.0 / (n * t)) * r[fit_units].T @ r[fit_units], g)
        a[targets] = (r[targets] @ f) @ f.T
    return a


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=100)
    ap.add_argument("--T", type=int, default=20)
    ap.add_argument("--G", type=int, default=7)
    ap.add_argument("--sigma2", type=float, default=1.0)
    ap.add_argument("--reps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=11)
    args = ap.parse_args()

    rates = {k: [] for k in ("pipeline", "true-beta", "oracle-F", "nearest")}
    for r in range(args.reps):
        cfg = DgpConfig(N=args.N, T=args.T, G=args.G, sigma2=args.sigma2)
        panel, truth, par = generate_dgp(cfg, RngSpec(args.seed, r))
        rng = RngSpec(args.seed + 1, r)
        rates["pipeline"].append(misclassification_rate(classify(panel, args.G, rng=rng).g_hat, truth))

        split = make_split(panel.n_units, rng.child(0))
        a = _true_beta_cross_fit(panel, par.beta, split, args.G)
        rates["true-beta"].append(misclassification_rate(find_lambda_hat(a, args.G)[1], truth))

        f, _ = np.linalg.qr(par.alpha[0].T)
        a = (residuals(panel, par.beta) @ f) @ f.T
        rates["oracle-F"].append(misclassification_rate(find_lambda_hat(a, args.G)[1], truth))

        centres = par.alpha[0] @ f @ f.T
        nearest = np.argmin(((a[:, None, :] - centres[None]) ** 2).sum(axis=2), axis=1) + 1
        rates["nearest"].append(misclassification_rate(nearest, truth))

    print(f"N={args.N} T={args.T} G={args.G} sigma2={args.sigma2:g} reps={args.reps}")
    for k, v in rates.items():
        print(f"  {k:10s} {np.mean(v):.3f}")


if __name__ == "__main__":
    main()
