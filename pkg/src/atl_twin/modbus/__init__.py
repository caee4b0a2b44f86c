from .codec import (
    ExceptionResponse,
    InvalidQuantity,
    MalformedFrame,
    ModbusError,
    ProtocolIdNonzero,
    ReadRequest,
    ReadResponse,
    UnsupportedFunction,
    WriteMultipleRequest,
    WriteMultipleResponse,
    WriteSingleRequest,
    WriteSingleResponse,
    decode_request,
    decode_response,
    encode_request,
    encode_response,
)
from .registers import (
    HOLDING_CONTACT_RAMP,
    HOLDING_ENABLE,
    HOLDING_ERROR_ACK,
    HOLDING_PAYLOAD,
    HOLDING_TARGET_FORCE,
    INPUT_ACTUAL_FORCE,
    INPUT_CONTACT_STATE,
    INPUT_ERROR_CODE,
    INPUT_STROKE,
    SCALE_FORCE,
    SCALE_PAYLOAD,
    SCALE_RAMP,
    SCALE_STROKE,
    AcfRegisterBank,
)
from .client import CommTimeout, ModbusClient
from .server import AcfServer

__all__ = [
    "AcfRegisterBank",
    "AcfServer",
    "CommTimeout",
    "ExceptionResponse",
    "InvalidQuantity",
    "MalformedFrame",
    "ModbusClient",
    "ModbusError",
    "ProtocolIdNonzero",
    "ReadRequest",
    "ReadResponse",
    "UnsupportedFunction",
    "WriteMultipleRequest",
    "WriteMultipleResponse",
    "WriteSingleRequest",
    "WriteSingleResponse",
    "decode_request",
    "decode_response",
    "encode_request",
    "encode_response",
]
