#pragma once

#include <exception>

#include "sidp/common.hpp"

namespace sidp {

enum ExitCode : int { kExitOk = 0, kExitOther = 1, kExitConfig = 2, kExitIo = 3, kExitContract = 4 };

inline ExitCode exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) return kExitConfig;
    if (dynamic_cast<const IoError*>(&e) != nullptr) return kExitIo;
    if (dynamic_cast<const ContractViolation*>(&e) != nullptr) return kExitContract;
    return kExitOther;
}

inline const char* exit_label(ExitCode c) {
    switch (c) {
        case kExitConfig: return "config error";
        case kExitIo: return "I/O error";
        case kExitContract: return "contract violation";
        default: return "error";
    }
}

}  // namespace sidp
