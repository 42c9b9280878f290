"""Exception hierarchy shared across the package."""


class OrgScadaError(Exception):
    """Base class for all package errors."""


# --- agent runtime ---

class DuplicateName(OrgScadaError):
    pass


class InvalidRole(OrgScadaError):
    pass


class UnknownAgent(OrgScadaError):
    pass


class NotFound(OrgScadaError):
    pass


class DuplicateEntry(OrgScadaError):
    pass


class Unroutable(OrgScadaError):
    pass


# --- codec / transport ---

class CodecError(OrgScadaError):
    """Base for decode failures; decode never raises anything else."""


class Truncated(CodecError):
    pass


class MalformedDocument(CodecError):
    pass


class UnknownPerformative(CodecError):
    pass


class PayloadTooLarge(OrgScadaError):
    pass


class ConnectionRefusedByPeer(OrgScadaError):
    pass


class ConnectTimeout(OrgScadaError):
    pass


# --- organization / resolution ---

class ConfigInvalid(OrgScadaError):
    pass


class AddressInUse(OrgScadaError):
    pass


class ServiceUnknownEverywhere(OrgScadaError):
    pass


class ResolveTimeout(OrgScadaError):
    pass


class PeerUnreachable(OrgScadaError):
    pass


class RegistrationRejected(OrgScadaError):
    pass


# --- plant simulation ---

class UnknownVariable(OrgScadaError):
    pass


class NotWritable(OrgScadaError):
    pass


class OutOfRange(OrgScadaError):
    pass


# --- operator sessions / harness ---

class SessionClosed(OrgScadaError):
    pass


class ScenarioInvalid(OrgScadaError):
    pass
