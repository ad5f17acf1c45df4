# Factorizations, regularity and the divisor construction
# Run: python3 demos/02_factorizations.py
import numpy as np

from ncfactor import fixtures as fx, regfact as rf
from ncfactor.manop import MultiAnalyticSymbol, multiply
from ncfactor.pipeline import extract_chain

# Constant factors are enough to see regularity at work.  Two contractions
# A_1: C^2 -> C^2 and A_2: C^2 -> C^2, each with a one dimensional defect.
A1 = np.diag([1.0, 0.6])
A2 = np.diag([0.6, 1.0])
ch = rf.make_chain([MultiAnalyticSymbol.constant(A, 2) for A in (A1, A2)], 3)
rep = rf.is_k_regular(ch)
print("defects do not overlap, regular:", rep.regular)

# Put both defects on the same vector and the product can no longer be
# told apart from a single factor with that defect: not regular.
A2 = np.diag([1.0, 0.6])
ch = rf.make_chain([MultiAnalyticSymbol.constant(A, 2) for A in (A1, A2)], 3)
print("overlapping defects, regular:", rf.is_k_regular(ch).regular)

# A brute force check on the matrices themselves gives the same answer.
print("matrix oracle:", rf.constant_regularity_oracle([A1, A2]))

# Regularity can be tested pairwise or by grouping factors; all routes agree.
cases = fx.constant_cases(10, 0)
for case in cases[:4]:
    c = case.chain()
    verdicts = [rf.check_partition_equivalence(c, p).consistent for p in rf.all_partitions(c.k)]
    print(case.engineered, rf.is_k_regular(c).regular, all(verdicts))

# Divisors: if Theta_2' = Omega Theta_1 then Omega can be recovered from the
# two known factors.
f = fx.nilpotent_fixture(1501, 2, 4, 3, 2)
chain = extract_chain(f.T, f.chain, 5)
th1, th2, th3 = chain.factors
dv = rf.divisor_extract(th1, multiply(th2, th1), outer=(multiply(th3, th2), th3))
print("divisor residuals:", dv.residual_left, dv.residual_right)
print("Omega equals the middle factor:", dv.omega.max_diff(th2) < 1e-8)
