"""
Pruning a matrix and storing it as CSC
======================================

"""

import numpy as np
from hamsham import prune, csc_encode, csc_decode, psi_csc

rng = np.random.default_rng(0)
W = rng.normal(size=(8, 6))

# keep only the largest 25% of magnitudes
pr = prune(W, 75)
print("threshold:", round(pr.threshold, 4))
print("surviving entries:", int(pr.mask.sum()), "of", W.size)

M = csc_encode(pr.matrix)
print("nz:", np.round(M.nz, 3))
print("ri:", M.ri)
print("cb:", M.cb)

# the storage ratio against a dense matrix of the same word size
print("psi_CSC:", psi_csc(*W.shape, M.nnz))

assert np.array_equal(csc_decode(M), pr.matrix)
