from .analytic import (
    double_well,
    double_well_grad,
    double_well_problem,
    multimodal10,
    multimodal10_grad,
    multimodal10_problem,
    offset_cost,
    quadratic_problem,
    rosenbrock_problem,
)
from .lj import (
    DomainError,
    LJCluster,
    lj_cost,
    lj_grad,
    lj_problem,
    lj_shifted,
    shifted_energy,
    shifted_gradient,
)
from .mlp import (
    Dataset,
    MLPShape,
    gen_sine_dataset,
    generalization_mse,
    mlp_forward,
    mlp_problem,
    mlp_sse,
    mlp_sse_regularized,
    sine_test_grid,
)
from .sampling import InitialPrior, sample_initial_states, sample_uniform_states
