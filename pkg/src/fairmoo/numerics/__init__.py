from .autodiff import Tape, UnsupportedOperation, Var, evaluate, value_and_grad
from .gradcheck import FiniteDiffError, finite_diff, finite_diff_stacked, max_rel_error
from .linalg import SingularMatrixError, mat_frac_power, sym_eig, symmetrize
from .tensor import ParamVector, Segment, as_tensor, load_tensor, save_tensor

__all__ = [
    "FiniteDiffError",
    "ParamVector",
    "Segment",
    "SingularMatrixError",
    "Tape",
    "UnsupportedOperation",
    "Var",
    "as_tensor",
    "evaluate",
    "finite_diff",
    "finite_diff_stacked",
    "load_tensor",
    "mat_frac_power",
    "max_rel_error",
    "save_tensor",
    "sym_eig",
    "symmetrize",
    "value_and_grad",
]
