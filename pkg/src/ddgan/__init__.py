"""Physics-informed WGAN-GP for model-free data-driven solid mechanics."""
from .adversarial import Critic, gradient_penalty, vanilla_gan_loss, wgan_gp_objective, wgan_loss
from .dataset import MaterialDatabase, Nearest
from .generator import Generator, GeneratorOutput, physics_loss
from .geometry import QuarterPlate, sample_boundary, sample_interior, sample_test, sobol
from .material import MaterialParams, benchmark_metric, stress_from_strain, synthesize_dataset
from .mlp import MlpSpec, ParameterSet, forward, init_params, input_jacobian
from .phase_space import MetricMatrix, PhaseState, StrainVoigt, StressVoigt, metric_sq_distance, whiten
from .training import OneCycle, TrainConfig, TrainingLog, train

__all__ = [
    "Critic", "gradient_penalty", "vanilla_gan_loss", "wgan_gp_objective", "wgan_loss",
    "MaterialDatabase", "Nearest", "Generator", "GeneratorOutput", "physics_loss",
    "QuarterPlate", "sample_boundary", "sample_interior", "sample_test", "sobol",
    "MaterialParams", "benchmark_metric", "stress_from_strain", "synthesize_dataset",
    "MlpSpec", "ParameterSet", "forward", "init_params", "input_jacobian",
    "MetricMatrix", "PhaseState", "StrainVoigt", "StressVoigt", "metric_sq_distance", "whiten",
    "OneCycle", "TrainConfig", "TrainingLog", "train",
]
