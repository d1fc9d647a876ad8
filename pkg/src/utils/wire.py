"""Flat little-endian wire form of phase messages, used by transcript dumps."""

import hashlib
import struct

import numpy as np

from src.models.message_model import MessageKind, PhaseMessage, endpoint_id, is_db

HEADER = struct.Struct("<IIII")
DB_TAG = 0x10000
KIND_CODES = {kind: code for code, kind in enumerate(MessageKind, start=1)}
CODE_KINDS = {code: kind for kind, code in KIND_CODES.items()}


def endpoint_code(endpoint: str) -> int:
    return DB_TAG + endpoint_id(endpoint) if is_db(endpoint) else endpoint_id(endpoint)


def endpoint_name(code: int) -> str:
    return f"DB{code - DB_TAG}" if code >= DB_TAG else f"C{code}"


def payload_bytes(payload) -> bytes:
    return np.asarray(payload, dtype="<u4").tobytes()


def encode_message(msg: PhaseMessage) -> bytes:
    header = HEADER.pack(KIND_CODES[msg.kind], endpoint_code(msg.sender), endpoint_code(msg.receiver), msg.length)
    return header + payload_bytes(msg.payload)


def decode_message(blob: bytes) -> tuple[MessageKind, str, str, list[int]]:
    kind, sender, receiver, length = HEADER.unpack_from(blob)
    payload = np.frombuffer(blob, dtype="<u4", count=length, offset=HEADER.size)
    return CODE_KINDS[kind], endpoint_name(sender), endpoint_name(receiver), [int(v) for v in payload]


def payload_hash(payload) -> str:
    return hashlib.sha256(payload_bytes(payload)).hexdigest()[:16]


def transcript_line(step: int, msg: PhaseMessage) -> str:
    return f"{step} {msg.kind.value} {msg.sender} {msg.receiver} {msg.length} {payload_hash(msg.payload)}"
