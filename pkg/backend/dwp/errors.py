class DwpError(Exception):
    """Domain exception with an exit code and details"""
    def __init__(self, message, exit_code=1, details=None):
        super().__init__(message)
        self.message = message
        self.exit_code = exit_code
        self.details = details or {}


class InvalidLayoutError(DwpError):
    """Site layout cannot be turned into a ring profile"""
    def __init__(self, message, turbine=None, field=None):
        details = {k: v for k, v in (("turbine", turbine), ("field", field)) if v is not None}
        super().__init__(message=message, exit_code=2, details=details)


class InvalidCarcassError(DwpError):
    """Carcass record cannot be placed in the searched area"""
    def __init__(self, message, turbine=None, record=None):
        details = {k: v for k, v in (("turbine", turbine), ("record", record)) if v is not None}
        super().__init__(message=message, exit_code=2, details=details)


class SchemaError(DwpError):
    """Input table missing a column or carrying bad values"""
    def __init__(self, message, column=None):
        super().__init__(message=message, exit_code=2,
                         details={"column": column} if column else {})


class DegenerateInputError(DwpError):
    def __init__(self, message):
        super().__init__(message=message, exit_code=2)


class SingularFitError(DwpError):
    def __init__(self, message):
        super().__init__(message=message, exit_code=1)


class NotExtensibleError(DwpError):
    def __init__(self, form):
        super().__init__(
            message=f"Model '{form}' is not extensible beyond the search radius",
            exit_code=4,
            details={"form": str(form)},
        )


class InvalidParametersError(DwpError):
    def __init__(self, message):
        super().__init__(message=message, exit_code=1)


class InvalidArgumentError(DwpError):
    def __init__(self, message):
        super().__init__(message=message, exit_code=1)


class EstimationFailedError(DwpError):
    def __init__(self, message):
        super().__init__(message=message, exit_code=4)


class NoViableModelError(DwpError):
    def __init__(self, message="No fitted model converged"):
        super().__init__(message=message, exit_code=3)


class SimulationError(DwpError):
    def __init__(self, message):
        super().__init__(message=message, exit_code=1)


class DwpIOError(DwpError):
    def __init__(self, message, path=None):
        super().__init__(message=message, exit_code=1,
                         details={"path": str(path)} if path else {})
