#pragma once

#include <stdexcept>
#include <string>

namespace dialcoord {

// Every failure carries a stable machine-readable code ("empty_history",
// "provider_timeout", ...) plus a human message. Pipeline stages may attach
// the stage name and aspect id that produced the failure.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    explicit Error(std::string code) : Error(code, "") {}

    const std::string& code() const noexcept { return code_; }

    const std::string& stage() const noexcept { return stage_; }
    int aspect_id() const noexcept { return aspect_id_; }

    Error& with_stage(std::string stage) {
        stage_ = std::move(stage);
        return *this;
    }
    Error& with_aspect(int aspect_id) {
        aspect_id_ = aspect_id;
        return *this;
    }

private:
    std::string code_;
    std::string stage_;
    int aspect_id_ = 0;
};

}  // namespace dialcoord
