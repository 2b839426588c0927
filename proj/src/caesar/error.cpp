#include "caesar/error.hpp"

namespace caesar {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:    return "invalid argument";
        case ErrorCode::Parse:              return "parse error";
        case ErrorCode::Validation:         return "validation error";
        case ErrorCode::Io:                 return "i/o error";
        case ErrorCode::MissingBinding:     return "missing binding";
        case ErrorCode::UnknownTemplate:    return "unknown template";
        case ErrorCode::CredentialMissing:  return "credential missing";
        case ErrorCode::Transport:          return "transport error";
        case ErrorCode::ProviderStatus:     return "provider error status";
        case ErrorCode::NoScriptedResponse: return "no scripted response";
        case ErrorCode::InvalidContent:     return "invalid content";
        case ErrorCode::FetchFailed:        return "fetch failed";
        case ErrorCode::SearchFailed:       return "search failed";
        case ErrorCode::EmptyKnowledgeBase: return "knowledge base empty";
        case ErrorCode::EmptySample:        return "empty sample";
        case ErrorCode::UndefinedBias:      return "undefined bias";
        case ErrorCode::Integrity:          return "integrity error";
        case ErrorCode::Unsupported:        return "unsupported";
    }
    return "unknown error";
}

}  // namespace caesar
