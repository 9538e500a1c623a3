"""Predicted squared cosine of several preprocessors on a Poisson channel.

The optimal preprocessor sits on top at every ratio.  Trimming and subset
selection are tuned over their parameter grids before being compared.
"""

from optspec import asymptotics as A
from optspec import channels as C
from optspec import design as D
from optspec import preprocess as P

ch = C.poisson(5)
T_opt = D.optimal_preprocessor(ch)
print(f"{'alpha':>6} {'optimal':>9} {'mm':>9} {'trim':>14} {'subset':>16}")
for alpha in (1.5, 2.0, 3.0, 5.0, 10.0):
    best = A.solve_lambda_star(ch, T_opt, alpha).rho
    mm = A.solve_lambda_star(ch, P.MM(alpha, ch), alpha).rho
    a, trim, _ = A.tune_trim(ch, alpha)
    b, sub, _ = A.tune_subset(ch, alpha)
    print(f"{alpha:6g} {best:9.5f} {mm:9.5f} {trim.rho:9.5f} (a={a:<2}) {sub.rho:9.5f} (b={b:.2f})")

# In the noiseless channel the optimal preprocessor is unbounded below, so a
# truncated member of the epsilon family is used instead; its loss is small.
nl = C.noiseless()
print("\nnoiseless, epsilon family at alpha=3")
ref = D.rho_optimal(nl, 3.0)
for eps in (0.5, 0.3, 0.1, 0.05):
    T = D.epsilon_preprocessor(nl, 3.0, eps)
    rho = A.solve_lambda_star(nl, T, 3.0).rho
    print(f"  eps={eps:<5} rho={rho:.5f}  loss={ref - rho:.2e}  v={T.v:.5f}")
