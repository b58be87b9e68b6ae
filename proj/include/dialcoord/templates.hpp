#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "dialcoord/core.hpp"

namespace dialcoord {

using TemplateValues = std::map<std::string, std::string>;

// Prompt body with named "{placeholder}" slots.
struct PromptTemplate {
    std::string template_id;
    std::string body;
    Task task = Task::esc;

    std::set<std::string> placeholders() const;

    // Throws "missing_placeholder" if the body references a name not in values.
    std::string instantiate(const TemplateValues& values) const;
};

PromptTemplate load_template(const std::filesystem::path& file, std::string template_id, Task task);

// "one", "two", ... for 1..12, digits otherwise.
std::string number_word(int n);

}  // namespace dialcoord
