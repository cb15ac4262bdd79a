from typing import Optional


class PipelineError(Exception):
    """Base class for every error raised by the engine"""
    exit_code = 1


class ConfigError(PipelineError):
    """Invalid configuration, plan, schedule or scene description"""
    exit_code = 2


class DataError(PipelineError):
    """Inputs that are well configured but inconsistent or unusable"""
    exit_code = 3


class InvalidConfig(ConfigError):
    pass


class InvalidSchedule(ConfigError):
    pass


class InvalidLevel(ConfigError):
    pass


class InvalidSpec(ConfigError):
    pass


class InvalidPose(DataError):
    pass


class ResolutionMismatch(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class DegenerateCorrespondences(DataError):
    pass


class EmptyInput(DataError):
    pass


class NoValidAnchors(DataError):
    pass


class InsufficientAnchors(DataError):
    def __init__(self, region: str, count: int):
        super().__init__(f"Region '{region}' has {count} usable anchors, at least 2 are required")
        self.region = region
        self.count = count


class ManifestError(DataError):
    def __init__(self, message: str, path: Optional[str] = None):
        super().__init__(f"{message}: {path}" if path else message)
        self.path = path
