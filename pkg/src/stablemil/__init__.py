"""StableMIL: robust multi-instance learning via treatment-effect instance selection."""

from .bags import (
    CAUSAL,
    NEGATIVE,
    NOISY,
    UNKNOWN,
    Bag,
    Instance,
    MILDataset,
    make_bag,
    oracle_label,
)
from .benchgen import (
    ConceptSpec,
    ShiftConfig,
    ShiftSplit,
    biased_split,
    draw_a,
    generate_population,
    iid_split,
    setting_config,
)
from .classifier import (
    BagClassifier,
    oracle_classifier,
    predict_bag,
    stub_classifier,
    train_bag_classifier,
)
from .dataio import load_dataset, save_dataset
from .embedding import (
    EmbeddedDataset,
    EmbeddingSpec,
    embed_bag,
    embed_dataset,
    local_scale,
    similarity,
    train_embedded_classifier,
)
from .errors import StableMILError
from .experiments import (
    ExperimentConfig,
    HyperParams,
    PRReport,
    RunReport,
    paired_t,
    pr_curve,
    run_baseline,
    run_experiment,
    run_stablemil,
    seed_for,
    setting_hyperparams,
    summarize,
    wilcoxon_rank_sum,
)
from .fisher import FisherEncoder, fisher_encode
from .gmm import GMMModel, gmm_fit, gmm_posteriors
from .kernels import KernelSpec, rbf
from .select import (
    ScoredCandidate,
    StablePool,
    TreatedBag,
    brute_force_effect,
    construct_treated_bag,
    learn_stable_instances,
    score_instance,
    select_threshold,
)
from .svm import SVMModel, smo_train, svm_decision

__version__ = "0.1.0"
