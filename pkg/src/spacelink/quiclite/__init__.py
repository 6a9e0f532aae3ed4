"""QUIC-subset secure transport: 1-RTT/0-RTT handshake, AEAD packet
protection with header masking, ACK-driven loss recovery and NewReno
congestion control.  Fixed version, 8-byte connection ids, no varints; not
interoperable with standard QUIC stacks."""

from . import frames, keys, recovery, wire
from .recovery import MalformedAck, NewReno, RttEstimator, SentPacket
from .session import (
    DatagramTooLarge,
    HandshakeFailure,
    MalformedHello,
    NotEstablished,
    ResumptionTicket,
    Role,
    ServerEndpoint,
    SessionError,
    State,
    StreamFinished,
    TransportSession,
    UnknownConnId,
    WrongState,
)
from .wire import MSS, MalformedHeader, Oversize

__all__ = [
    "frames",
    "keys",
    "recovery",
    "wire",
    "MalformedAck",
    "NewReno",
    "RttEstimator",
    "SentPacket",
    "DatagramTooLarge",
    "HandshakeFailure",
    "MalformedHello",
    "NotEstablished",
    "ResumptionTicket",
    "Role",
    "ServerEndpoint",
    "SessionError",
    "State",
    "StreamFinished",
    "TransportSession",
    "UnknownConnId",
    "WrongState",
    "MSS",
    "MalformedHeader",
    "Oversize",
]
