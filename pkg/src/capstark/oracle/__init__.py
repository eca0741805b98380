"""Independent reference solvers: complex dilation, Airy matching and the free-field control."""
from .airy import AiryResult, PiecewiseProblem, airy_matching, matching_determinant, wronskian_defect
from .control import ControlReport, free_stark_control
from .dilation import DilationParams, dilated_operator, dilation_resonances

__all__ = ["AiryResult", "PiecewiseProblem", "airy_matching", "matching_determinant", "wronskian_defect",
           "ControlReport", "free_stark_control", "DilationParams", "dilated_operator", "dilation_resonances"]
