#include "tpgn/error.hpp"

namespace tpgn {

const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Parse: return "ParseError";
    case ErrorKind::EmptyCorpus: return "EmptyCorpus";
    case ErrorKind::NoComments: return "NoComments";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::UnknownWord: return "UnknownWord";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptySequence: return "EmptySequence";
    case ErrorKind::NonScalarLoss: return "NonScalarLoss";
    case ErrorKind::EmptyArticle: return "EmptyArticle";
    case ErrorKind::EmptyTarget: return "EmptyTarget";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::CorpusTooSmall: return "CorpusTooSmall";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Format: return "FormatError";
  }
  return "Error";
}

}  // namespace tpgn
