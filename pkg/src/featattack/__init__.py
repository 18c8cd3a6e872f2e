"""featattack: transferable adversarial attacks on image encoders.

Perturbations are optimized against an ensemble of encoders drawn from
three pretraining families (cross-modal alignment, multimodal
understanding, visual self-supervision). Per-family features are
L2-normalized and concatenated, and a contrastive matching loss pulls
the adversarial feature toward a target image while pushing it away
from the source, driven by a momentum sign-gradient loop under an
L-infinity pixel budget with per-iteration random crops.
"""

from .aggregation import FusionSpec, aggregate, aggregate_adversarial, fuse_cross_modal
from .attack import (
    AttackState,
    CropTransform,
    CropWindow,
    attack_step,
    init_state,
    pair_rng,
    run_attack,
)
from .core import (
    AggregatedFeature,
    AttackConfig,
    EvalRecord,
    FeatureVector,
    ImageTensor,
    Paradigm,
    ParadigmTag,
    Perturbation,
    clamp_image,
    project_linf,
)
from .encoders import (
    CaptionGenerator,
    MockCaptionGenerator,
    MockTextEncoder,
    ParadigmEncoder,
    TextEncoder,
    ToyConvEncoder,
    ToyLinearEncoder,
    encode,
    encode_text,
    generate_caption,
    vjp,
)
from .errors import (
    ConfigurationError,
    DegenerateFeatureError,
    EncoderBackendError,
    FeatAttackError,
    JudgeError,
    RegistryError,
    ValidationError,
)
from .evaluation import (
    BatchMetrics,
    Judge,
    MockJudge,
    MockVictim,
    Mode,
    PromptedJudge,
    VictimClient,
    aggregate_metrics,
    evaluate_pair,
    judge_pair,
)
from .objective import (
    LossBreakdown,
    LossParams,
    contrastive_loss,
    cosine_sim,
    loss_and_gradient,
    loss_gradient_wrt_perturbation,
)
from .registry import (
    CrossModalPair,
    EncoderSuite,
    build_suite,
    default_toy_suite_config,
    load_suite_config,
    register_caption_adapter,
    register_image_adapter,
    register_text_adapter,
)

__version__ = "0.1.0"
