#include "noisy_mdp/warnings.hpp"

#include <iostream>

namespace noisy_mdp {

namespace {
thread_local WarningHandler t_handler;
}

WarningHandler set_warning_handler(WarningHandler handler) {
    WarningHandler previous = std::move(t_handler);
    t_handler = std::move(handler);
    return previous;
}

void warn(const std::string& message) {
    if (t_handler) {
        t_handler(message);
    } else {
        std::cerr << "warning: " << message << '\n';
    }
}

}  // namespace noisy_mdp
