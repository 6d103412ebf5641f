#include "fpscan/diagnostics.hpp"

namespace fpscan {

void Diagnostics::warn(const std::string& code, std::string message) {
    ++counts_[code];
    ++total_;
    if (messages_.size() < kMaxMessages)
        messages_.push_back(message.empty() ? code : code + ": " + message);
}

std::size_t Diagnostics::count(const std::string& code) const {
    auto it = counts_.find(code);
    return it == counts_.end() ? 0 : it->second;
}

void Diagnostics::merge(const Diagnostics& other) {
    for (const auto& [code, n] : other.counts_) counts_[code] += n;
    total_ += other.total_;
    for (const auto& m : other.messages_) {
        if (messages_.size() >= kMaxMessages) break;
        messages_.push_back(m);
    }
}

}  // namespace fpscan
