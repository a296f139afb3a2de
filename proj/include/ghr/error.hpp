// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ghr {

enum class ErrorCode {
    // scene graphs and vocabularies
    DuplicateClass,
    UnknownHumanClass,
    MalformedDocument,
    UnknownClass,
    DanglingEdge,
    DuplicateNodeId,
    MalformedBBox,
    SelfLoop,
    // video graphs
    AllFramesSkipped,
    InvalidClipLength,
    UnknownNode,
    // tensors
    ShapeMismatch,
    IndexOutOfRange,
    EmptyInput,
    NotScalar,
    NoTape,
    // files
    BadMagic,
    VersionMismatch,
    MissingTensor,
    MalformedFile,
    DimensionMismatch,
    DuplicateId,
    // question encoding
    EmptyQuestion,
    // reasoning head
    InvalidOrder,
    // datasets
    MissingVideo,
    UnknownAnswer,
    UnknownCategory,
    SplitLeakage,
    InvalidArgument,
    // training
    NonFiniteLoss,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every recoverable failure in the library is raised as an Error carrying a
/// machine-checkable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ghr
