class SteinBiasException(Exception):
    pass


class InvalidConfigException(SteinBiasException):
    pass


class DimensionException(SteinBiasException):
    pass


class ValidationException(SteinBiasException):
    pass


class SupportTooLargeException(SteinBiasException):
    pass


class DegenerateException(SteinBiasException):
    pass


class RejectionLimitException(DegenerateException):
    pass


class ConstructionException(SteinBiasException):
    pass


class NotEnumerableException(SteinBiasException): ...
