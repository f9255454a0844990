from enum import Enum

# -------- Model Enums --------

class Term(Enum):
    """Distance regressors available to the Poisson models"""
    INV = "1/x"
    LOG = "log(x)"
    X1 = "x"
    X2 = "x^2"
    X3 = "x^3"
    LOG2 = "log(x)^2"

    @property
    def needs_positive_x(self):
        return self in (Term.INV, Term.LOG, Term.LOG2)

    @property
    def symbol(self):
        """Coefficient symbol used in reports"""
        symbols = {
            Term.INV: "b_i",
            Term.LOG: "b0",
            Term.X1: "b1",
            Term.X2: "b2",
            Term.X3: "b3",
            Term.LOG2: "b_log2",
        }
        return symbols[self]


class OffsetAdjust(Enum):
    """Additive modifier to log(exposure) that reshapes a form"""
    NONE = "none"
    MINUS_LOG = "-log(x)"
    PLUS_LOG = "+log(x)"
    MINUS_HALF_X = "-x/2"
    MINUS_FIVE_HALVES_LOG = "-(5/2)log(x)"

    @property
    def log_power(self):
        """Power of x contributed to the radial kernel"""
        powers = {
            OffsetAdjust.NONE: 0.0,
            OffsetAdjust.MINUS_LOG: -1.0,
            OffsetAdjust.PLUS_LOG: 1.0,
            OffsetAdjust.MINUS_HALF_X: 0.0,
            OffsetAdjust.MINUS_FIVE_HALVES_LOG: -2.5,
        }
        return powers[self]

    @property
    def linear_rate(self):
        """Coefficient of x contributed to the radial kernel"""
        return -0.5 if self is OffsetAdjust.MINUS_HALF_X else 0.0

    @property
    def needs_positive_x(self):
        return self.log_power != 0.0


class ModelForm(Enum):
    """Carcass distance model forms"""
    CONSTANT = "constant"
    XEP1 = "xep1"
    XEP01 = "xep01"
    XEP2 = "xep2"
    XEP02 = "xep02"
    XEP12 = "xep12"
    XEP012 = "xep012"
    XEP123 = "xep123"
    XEP0123 = "xep0123"
    LOGNORMAL = "lognormal"
    TNORMAL = "tnormal"
    MAXWELL_BOLTZMANN = "MaxwellBoltzmann"
    # supplementary
    XEP0 = "xep0"
    XEPI0 = "xepi0"
    CHISQUARED = "chisquared"
    EXPONENTIAL = "exponential"
    INVERSE_GAUSSIAN = "inverseGaussian"

    @property
    def is_standard(self):
        return self not in (
            ModelForm.XEP0, ModelForm.XEPI0, ModelForm.CHISQUARED,
            ModelForm.EXPONENTIAL, ModelForm.INVERSE_GAUSSIAN,
        )

    @property
    def template(self):
        from .model_config import ModelConfig
        return ModelConfig.get_form_template(self)

    @property
    def terms(self):
        return self.template.terms

    @property
    def offset_adjust(self):
        return self.template.offset_adjust

    @property
    def support_lo(self):
        return self.template.support_lo

    @property
    def needs_positive_x(self):
        return (any(t.needs_positive_x for t in self.terms)
                or self.offset_adjust.needs_positive_x
                or self.support_lo > 0)

    @classmethod
    def standard(cls):
        """The default battery of 12 forms"""
        return [form for form in cls if form.is_standard]

    @classmethod
    def parse(cls, name):
        for form in cls:
            if form.value.lower() == str(name).strip().lower():
                return form
        raise ValueError(f"Unknown model form '{name}'")


# -------- Layout Enums --------

class LayoutType(Enum):
    DISTANCE = "distance"
    SIMPLE = "simple"
    POLYGON = "polygon"
    GRID = "grid"


class PlotShape(Enum):
    """Shapes accepted in simple-geometry tables"""
    CIRCULAR = "circular"
    SQUARE = "square"
    RP = "RP"

    @classmethod
    def parse(cls, name):
        for shape in cls:
            if shape.value.lower() == str(name).strip().lower():
                return shape
        raise ValueError(f"Unknown plot shape '{name}'")


class ExportMode(Enum):
    POINT = "point"
    SIMULATED = "simulated"


# -------- Ballistics Enums --------

class Species(Enum):
    """Carcass types with their aerodynamic terminal velocity"""
    BAT = "bat"
    EAGLE = "eagle"

    @property
    def terminal_velocity(self):
        """m/s"""
        velocities = {
            Species.BAT: 8.8,
            Species.EAGLE: 25.0,
        }
        return velocities[self]


class WindKind(Enum):
    CONSTANT = "constant"
    WEIBULL_LOW = "weibull_low"
    WEIBULL_HIGH = "weibull_high"
    MODERATE = "moderate"


class FlightMode(Enum):
    """Carcass flight speed at the moment of impact"""
    ZERO = "zero"
    VARIABLE = "variable"


class PlotKind(Enum):
    CLEARED = "cleared"
    ROAD_PAD = "road_pad"
