from dataclasses import dataclass
from typing import Dict, Optional, Tuple
from .enums import ModelForm, OffsetAdjust, Term

# (term, comparison, threshold); every condition must hold for a form to be extensible
Condition = Tuple[Term, str, float]


@dataclass(frozen=True)
class FormTemplate:
    """GLM definition and extensibility rule for one model form"""
    form: ModelForm
    terms: Tuple[Term, ...]
    offset_adjust: OffsetAdjust = OffsetAdjust.NONE
    conditions: Optional[Tuple[Condition, ...]] = ()  # None: never extensible
    support_lo: float = 0.0
    closed_form: Optional[str] = None  # scipy.stats family when one exists

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def term_index(self, term: Term) -> int:
        return self.terms.index(term)


class ModelConfig:
    """Form presets"""

    FORM_TEMPLATES: Dict[ModelForm, FormTemplate] = {
        ModelForm.CONSTANT: FormTemplate(
            form=ModelForm.CONSTANT,
            terms=(),
            conditions=None,
        ),

        ModelForm.XEP1: FormTemplate(
            form=ModelForm.XEP1,
            terms=(Term.X1,),
            conditions=((Term.X1, "<", 0.0),),
            closed_form="gamma",
        ),

        ModelForm.XEP01: FormTemplate(
            form=ModelForm.XEP01,
            terms=(Term.LOG, Term.X1),
            conditions=((Term.LOG, ">", -2.0), (Term.X1, "<", 0.0)),
            closed_form="gamma",
        ),

        ModelForm.XEP2: FormTemplate(
            form=ModelForm.XEP2,
            terms=(Term.X2,),
            conditions=((Term.X2, "<", 0.0),),
            closed_form="rayleigh",
        ),

        ModelForm.XEP02: FormTemplate(
            form=ModelForm.XEP02,
            terms=(Term.LOG, Term.X2),
            conditions=((Term.LOG, ">", -2.0), (Term.X2, "<", 0.0)),
        ),

        ModelForm.XEP12: FormTemplate(
            form=ModelForm.XEP12,
            terms=(Term.X1, Term.X2),
            conditions=((Term.X2, "<", 0.0),),
        ),

        ModelForm.XEP012: FormTemplate(
            form=ModelForm.XEP012,
            terms=(Term.LOG, Term.X1, Term.X2),
            conditions=((Term.LOG, ">", -2.0), (Term.X2, "<", 0.0)),
        ),

        ModelForm.XEP123: FormTemplate(
            form=ModelForm.XEP123,
            terms=(Term.X1, Term.X2, Term.X3),
            conditions=((Term.X3, "<", 0.0),),
        ),

        ModelForm.XEP0123: FormTemplate(
            form=ModelForm.XEP0123,
            terms=(Term.LOG, Term.X1, Term.X2, Term.X3),
            conditions=((Term.LOG, ">", -2.0), (Term.X3, "<", 0.0)),
        ),

        ModelForm.LOGNORMAL: FormTemplate(
            form=ModelForm.LOGNORMAL,
            terms=(Term.LOG, Term.LOG2),
            conditions=((Term.LOG2, "<", 0.0),),
            closed_form="lognorm",
        ),

        ModelForm.TNORMAL: FormTemplate(
            form=ModelForm.TNORMAL,
            terms=(Term.X1, Term.X2),
            offset_adjust=OffsetAdjust.MINUS_LOG,
            conditions=((Term.X2, "<", 0.0),),
            closed_form="truncnorm",
        ),

        ModelForm.MAXWELL_BOLTZMANN: FormTemplate(
            form=ModelForm.MAXWELL_BOLTZMANN,
            terms=(Term.X2,),
            offset_adjust=OffsetAdjust.PLUS_LOG,
            conditions=((Term.X2, "<", 0.0),),
            closed_form="maxwell",
        ),

        ModelForm.XEP0: FormTemplate(
            form=ModelForm.XEP0,
            terms=(Term.LOG,),
            conditions=((Term.LOG, "<", -2.0),),
            support_lo=1.0,
            closed_form="pareto",
        ),

        ModelForm.XEPI0: FormTemplate(
            form=ModelForm.XEPI0,
            terms=(Term.INV, Term.LOG),
            conditions=((Term.LOG, "<", -2.0), (Term.INV, "<", 0.0)),
            closed_form="invgamma",
        ),

        ModelForm.CHISQUARED: FormTemplate(
            form=ModelForm.CHISQUARED,
            terms=(Term.LOG,),
            offset_adjust=OffsetAdjust.MINUS_HALF_X,
            conditions=((Term.LOG, ">", -2.0),),
            closed_form="gamma",
        ),

        ModelForm.EXPONENTIAL: FormTemplate(
            form=ModelForm.EXPONENTIAL,
            terms=(Term.X1,),
            offset_adjust=OffsetAdjust.MINUS_LOG,
            conditions=((Term.X1, "<", 0.0),),
            closed_form="expon",
        ),

        ModelForm.INVERSE_GAUSSIAN: FormTemplate(
            form=ModelForm.INVERSE_GAUSSIAN,
            terms=(Term.INV, Term.X1),
            offset_adjust=OffsetAdjust.MINUS_FIVE_HALVES_LOG,
            conditions=((Term.INV, "<", 0.0), (Term.X1, "<", 0.0)),
            closed_form="invgauss",
        ),
    }

    @classmethod
    def get_form_template(cls, form: ModelForm) -> FormTemplate:
        return cls.FORM_TEMPLATES[form]
