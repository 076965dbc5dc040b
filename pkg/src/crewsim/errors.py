"""Exception hierarchy shared by every crewsim module."""


class CrewsimError(Exception):
    """Base class for all errors raised by this package."""


class ConfigInvalid(CrewsimError):
    pass


class InsufficientCatalog(CrewsimError):
    pass


class DeadPlayer(CrewsimError):
    def __init__(self, player: int):
        super().__init__(f"player {player} is dead")
        self.player = player


class IllegalAction(CrewsimError):
    pass


class AgentFailure(CrewsimError):
    """A decision callback raised; the original error is chained as __cause__."""

    def __init__(self, player: int, message: str = ""):
        super().__init__(f"agent for player {player} failed" + (f": {message}" if message else ""))
        self.player = player


class RoleMismatch(CrewsimError):
    pass


class ParseFailure(CrewsimError):
    pass


class ClientFailure(CrewsimError):
    pass


class MissingScript(CrewsimError):
    def __init__(self, tag: str):
        super().__init__(f"no scripted reply for tag {tag!r}")
        self.tag = tag


class SessionClosed(CrewsimError):
    pass


class DegenerateCorpus(CrewsimError):
    pass


class CorruptRecord(CrewsimError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason
