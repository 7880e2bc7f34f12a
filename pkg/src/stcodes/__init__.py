"""Sparse ternary and dense binary codes for approximate nearest-neighbor identification."""
from .channel_model import ChannelSpec, FeatureMatrix, q_function, rho, sample_database, sample_query
from .decoders import (
    DecodeResult, EncodedDatabase, InvertedIndex, build_index, encode_database, exact_nn, hamming_decode,
    ml_decode, nn_list, sublinear_decode,
)
from .encoder import (
    BinaryCode, TernaryCode, ThresholdPair, alpha_of, binarize, binary_entropy_h2, gamma_of, ternarize,
    ternary_entropy,
)
from .errors import CapacityError, ConfigError, DomainError, FormatError, ShapeError, StcError, StcWarning
from .info_theory import (
    CodingGainReport, TransitionMatrix, VotingConstants, binary_flip_prob, binary_mi, matched_lengths,
    optimize_lambda_y, ternary_mi, transition_matrix, voting_constants,
)
from .projection import ProjectionMatrix, generate_dense, generate_sparse, project, projected_channel_check
from .bvn import bivariate_rect_prob

__version__ = "0.1.0"
