"""The variance schedule and the forward (noising) process.

Walks through the basic quantities every sampler relies on: the beta/alpha
tables, the closed-form noising of a clean signal, the equivalence between
stepwise and closed-form noising, and the exact algebraic inverse that
recovers the clean signal from its noisy version when the noise is known.
"""

import numpy as np

import binoise as bn

sched = bn.default_schedule(T=100)
print("schedule: T =", sched.T)
print("  beta_1   =", sched.betas[0])
print("  beta_T   =", sched.betas[-1])
print("  abar_T   =", sched.alpha_bars[-1], "(terminal state is almost pure noise)")

# noising a signal: y_t = sqrt(abar_t) * y0 + sqrt(1 - abar_t) * eps
g = np.random.default_rng(0)
y0 = np.linspace(-1, 1, 8)
eps = g.standard_normal(8)
for t in (1, 25, 50, 100):
    y_t = bn.forward_sample(y0, t, eps, sched)
    print(f"t={t:4d}  signal fraction {np.sqrt(sched.alpha_bars[t-1]):.4f}  y_t[0]={y_t[0]:+.4f}")

# the stepwise chain has the same marginal as the closed form
n = 20_000
chain = np.zeros(n)
for t in range(1, sched.T + 1):
    chain = bn.forward_step(chain, t, g.standard_normal(n), sched)
print(f"\nchained t=1..T from y0=0: mean {chain.mean():+.4f} var {chain.var():.4f}"
      f"  (closed form: 0, {1 - sched.alpha_bars[-1]:.4f})")

# knowing the injected noise, the clean signal comes back exactly
y_t = bn.forward_sample(y0, 60, eps, sched)
recovered = bn.predict_x0(y_t, eps, 60, sched)
print(f"\nroundtrip error with known noise: {np.max(np.abs(recovered - y0)):.2e}")
