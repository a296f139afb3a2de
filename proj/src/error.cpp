// SPDX-License-Identifier: Apache-2.0
#include "ghr/error.hpp"

namespace ghr {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DuplicateClass: return "DuplicateClass";
        case ErrorCode::UnknownHumanClass: return "UnknownHumanClass";
        case ErrorCode::MalformedDocument: return "MalformedDocument";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::DanglingEdge: return "DanglingEdge";
        case ErrorCode::DuplicateNodeId: return "DuplicateNodeId";
        case ErrorCode::MalformedBBox: return "MalformedBBox";
        case ErrorCode::SelfLoop: return "SelfLoop";
        case ErrorCode::AllFramesSkipped: return "AllFramesSkipped";
        case ErrorCode::InvalidClipLength: return "InvalidClipLength";
        case ErrorCode::UnknownNode: return "UnknownNode";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::NotScalar: return "NotScalar";
        case ErrorCode::NoTape: return "NoTape";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::MissingTensor: return "MissingTensor";
        case ErrorCode::MalformedFile: return "MalformedFile";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::EmptyQuestion: return "EmptyQuestion";
        case ErrorCode::InvalidOrder: return "InvalidOrder";
        case ErrorCode::MissingVideo: return "MissingVideo";
        case ErrorCode::UnknownAnswer: return "UnknownAnswer";
        case ErrorCode::UnknownCategory: return "UnknownCategory";
        case ErrorCode::SplitLeakage: return "SplitLeakage";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    }
    return "Unknown";
}

}  // namespace ghr
