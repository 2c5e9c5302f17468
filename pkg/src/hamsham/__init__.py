"""Compression of dense neural-network layers: pruning, weight sharing and
probabilistic quantization, stored as CSC, HAM or sHAM with dot products
computed directly on the compressed form."""
from .compress import (
    SENTINEL,
    Codebook,
    PruneResult,
    QuantizationSpec,
    chain_prune_then_quantize,
    distortion,
    prob_quantize,
    prune,
    reconstruct,
    weight_share,
)
from .csc import CscMatrix, csc_decode, csc_dot, csc_encode, dense_dot, psi_csc
from .entropy import BitStream, BitWriter, HuffmanCode, code_stats, huffman_build, next_code_word
from .errors import (
    ConfigError,
    ContainerError,
    CorruptStreamError,
    DtypeError,
    HamShamError,
    LoadError,
    MalformedHeaderError,
    NonFiniteError,
    ShapeError,
)
from .ham import (
    HamContainer,
    ShamContainer,
    dot_ham,
    dot_sham,
    ham_decode,
    ham_encode,
    load_container,
    measured_occupancy,
    psi_ham,
    psi_sham,
    psi_sham_distinct,
    save_container,
    sham_decode,
    sham_encode,
)
from .matrix import as_matrix, load_matrix, percentile, quantiles, save_matrix, sparsity

__version__ = "0.1.0"
