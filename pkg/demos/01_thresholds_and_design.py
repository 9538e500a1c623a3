"""How much data does spectral initialization need, and what is the best it can do?

For a few measurement channels this prints the weak threshold below which
no preprocessor yields a correlated estimate, then walks up the sampling
ratio and shows how the best achievable squared cosine grows.
"""

from optspec import channels as C
from optspec import design as D

CHANNELS = {
    "noiseless (complex)": C.noiseless(),
    "noiseless (real)": C.noiseless("real"),
    "poisson kappa=5": C.poisson(5),
    "poisson kappa=0.5": C.poisson(0.5),
    "gaussian sigma=1": C.gaussian_noise(1.0),
}

print("weak thresholds")
for name, ch in CHANNELS.items():
    print(f"  {name:<22} alpha_weak = {C.alpha_weak(ch):.6f}")

print("\nbest squared cosine by sampling ratio")
alphas = [1.0, 1.5, 2.0, 3.0, 5.0, 10.0, 20.0]
print("  " + " " * 22 + "".join(f"{a:>9g}" for a in alphas))
for name, ch in CHANNELS.items():
    row = "".join(f"{D.rho_optimal(ch, a):9.4f}" for a in alphas)
    print(f"  {name:<22}{row}")

# Noise costs data: at the same ratio Poisson measurements lag behind noiseless ones,
# and a weaker intensity scale pushes the threshold further out.
