"""Privacy-preserving announcement aggregation for vehicular networks.

A leader vehicle that spots a road event asks nearby witnesses to echo
it; the echoes are folded into one threshold ring signature that proves
"at least t distinct vehicles back this message" without revealing
which ones.  The package also ships a deterministic discrete-event
simulator for availability and delay experiments.
"""

__version__ = "0.1.0"

from .cpk import (
    IdentityKey,
    MasterKeyMaterial,
    SystemParams,
    derive_private,
    derive_private_v2,
    derive_public,
    random_plate,
    setup,
)
from .elgamal import ElgamalTriple, forge, sign, verify
from .gf2 import BinaryField, FIELD_16, FIELD_256
from .ring import (
    RingAnnouncement,
    SignFraction,
    SignRequest,
    assemble,
    build_reply,
    build_request,
    validate_fraction,
    verify_ring,
)
from .protocol import (
    AggregationPacket,
    EventDescription,
    ReplyPacket,
    RequestPacket,
    decode_packet,
    encode_packet,
    verify_announcement,
)
from .sim import SimMetrics, SimScenario, anonymity_prob, run_scenario, sweep

__all__ = [
    "AggregationPacket",
    "BinaryField",
    "ElgamalTriple",
    "EventDescription",
    "FIELD_16",
    "FIELD_256",
    "IdentityKey",
    "MasterKeyMaterial",
    "ReplyPacket",
    "RequestPacket",
    "RingAnnouncement",
    "SignFraction",
    "SignRequest",
    "SimMetrics",
    "SimScenario",
    "SystemParams",
    "anonymity_prob",
    "assemble",
    "build_reply",
    "build_request",
    "decode_packet",
    "derive_private",
    "derive_private_v2",
    "derive_public",
    "encode_packet",
    "forge",
    "random_plate",
    "run_scenario",
    "setup",
    "sign",
    "sweep",
    "validate_fraction",
    "verify",
    "verify_announcement",
    "verify_ring",
]
