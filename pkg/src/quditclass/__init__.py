"""Single-qudit variational classifiers simulated with numpy."""
from .algebra import (
    GeneratorBasis,
    GeneratorCombo,
    expi,
    expi_directional_derivative,
    generalized_gell_mann_basis,
    gell_mann_basis,
    get_basis,
    l_operators,
    pauli_basis,
)
from .capacity import LMConfig, LMReport, estimate_lm_dimension
from .datasets import (
    Dataset,
    PCAModel,
    gen_circles,
    gen_moons,
    gen_three_class,
    gen_xor,
    load_csv,
    pca_fit,
    pca_transform,
    save_csv,
    standardize,
    stratified_split,
)
from .model import (
    ModelSpec,
    ParameterVector,
    SpecError,
    expectation_value,
    forward,
    kernel,
    kernel_qubit_model_a_closed_form,
    load_spec,
    predict,
    save_spec,
    validate_spec,
)
from .qstate import QuditState, bloch_vector, ground_state, su2_projection
from .training import (
    CrossEntropy,
    FitResult,
    SegmentLoss,
    SGDConfig,
    TrainConfig,
    accuracy,
    fit_multistart,
    fit_sgd,
    gradient,
    parameter_shift_gradient,
)
from .zoo import builtin_model, builtin_names

__version__ = "0.1.0"
