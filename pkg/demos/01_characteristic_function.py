# Characteristic functions of row contractions
# Run: python3 demos/01_characteristic_function.py
from ncfactor import freeword as fw, rowcon

# A row contraction is a tuple T = [T_1, ..., T_n] of d x d matrices whose
# row [T_1 ... T_n] has norm at most one.  Start with one variable.
T = rowcon.scalar([0.5])
theta = rowcon.char_function(T, 6)

# With n = 1 the symbol is a power series in one letter.  For a scalar a it
# should be (z - a) / (1 - conj(a) z), so the coefficients are -a and then
# (1 - |a|^2) a^(k-1).
for k in range(5):
    print(k, theta.coeff((1,) * k)[0, 0].real, (1 - 0.25) * 0.5 ** (k - 1) if k else -0.5)

# Now two noncommuting matrices.  Words over {1, 2} index the coefficients,
# ordered by length and then lexicographically.
T = rowcon.random_contraction(2, 3, seed=7)
print([fw.to_str(w) or "()" for w in fw.enumerate_words(2, 2).words])

dd = rowcon.defects(T)
print("defect ranks:", dd.defect_space.rank, dd.defect_space_star.rank)

theta = rowcon.char_function(T, 4)
print("symbol shape:", theta.shape, "words with coefficients:", len(theta.coeffs))

# The coefficient Grams add up to at most the identity: the symbol is contractive.
print("gram excess:", theta.coefficient_gram_excess())

# For a nilpotent tuple all long words vanish and the characteristic
# function is a polynomial; it is then inner.
Tn = rowcon.nilpotent(2, 4, seed=3, degree=2)
print("words of length 2 vanish:", rowcon.all_words_vanish(Tn, 2))
print("degree of the symbol:", rowcon.char_function(Tn, 5).degree)
