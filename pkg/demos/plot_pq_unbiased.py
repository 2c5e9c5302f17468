"""
Probabilistic quantization is unbiased
======================================

"""

import numpy as np
from hamsham import prob_quantize, reconstruct

W = np.array([[0.0, 0.25, 0.75, 1.0]])
draws = np.array([reconstruct(prob_quantize(W, 2, mode="uniform", seed=s))
                  for s in range(20000)])

# each draw only takes boundary values...
print("values seen:", np.unique(draws))
# ...but the average lands back on W
print("mean of draws:", draws.mean(axis=0).round(3))
print("original:     ", W)
