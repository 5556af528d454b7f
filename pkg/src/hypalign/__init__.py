"""Joint user and community alignment of social networks in a shared
Poincare ball: random-walk skip-gram embeddings optimized by Riemannian
SGD, alternating with EM over a generalized-hyperbolic mixture per
network, plus the Gromov delta-hyperbolicity diagnostics and the
alignment evaluation metrics."""

__version__ = "0.1.0"

from .align import (AlignmentReport, align_communities, community_accuracy,
                    evaluate, map_at_k, precision_at_k, quality, rank_users)
from .benchgen import SynthSpec, generate
from .corpus import (NegativeSampler, WalkCorpus, aggregate_pairs,
                     build_negative_sampler, context_pairs, random_walks,
                     sample_negatives)
from .errors import CoincidentPoints, DataError, NumericalError, ParseError
from .geometry import (conformal_factor, distance, distance_grad_y, exp_map,
                       project_to_ball, riemannian_rescale)
from .graphs import (Network, NetworkPair, anchor_community_ratio,
                     load_anchors, load_edge_list, load_labels, overlap_rate,
                     subsample_overlap)
from .hyperbolicity import all_pairs_distances, four_point_delta, graph_delta
from .mixture import (CommunityModel, EStepStats, GHParams, Membership,
                      bessel_k, bessel_k_dorder, check_pd, community_nll,
                      community_nll_upper, e_step, fit_mixture, gh_logpdf,
                      m_step)
from .model import JointModel, TrainConfig, load_checkpoint, save_checkpoint
from .optimizer import grad_context, grad_user, pair_loss, rsgd_step, train
