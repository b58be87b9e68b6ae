#include "dialcoord/templates.hpp"

#include <array>
#include <fstream>
#include <regex>
#include <sstream>

#include "dialcoord/error.hpp"

namespace dialcoord {

namespace {

const std::regex& placeholder_pattern() {
    static const std::regex re(R"(\{([a-z_]+)\})");
    return re;
}

}  // namespace

std::set<std::string> PromptTemplate::placeholders() const {
    std::set<std::string> names;
    for (auto it = std::sregex_iterator(body.begin(), body.end(), placeholder_pattern()); it != std::sregex_iterator();
         ++it) {
        names.insert((*it)[1].str());
    }
    return names;
}

std::string PromptTemplate::instantiate(const TemplateValues& values) const {
    std::string out;
    out.reserve(body.size() * 2);
    auto last = body.cbegin();
    for (auto it = std::sregex_iterator(body.begin(), body.end(), placeholder_pattern()); it != std::sregex_iterator();
         ++it) {
        const auto& m = *it;
        auto found = values.find(m[1].str());
        if (found == values.end()) {
            throw Error("missing_placeholder", "template '" + template_id + "' needs {" + m[1].str() + "}");
        }
        out.append(last, m[0].first);
        out += found->second;
        last = m[0].second;
    }
    out.append(last, body.cend());
    return out;
}

PromptTemplate load_template(const std::filesystem::path& file, std::string template_id, Task task) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("template_not_found", file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string body = buf.str();
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return PromptTemplate{std::move(template_id), std::move(body), task};
}

std::string number_word(int n) {
    static constexpr std::array<const char*, 13> words = {"zero", "one", "two",   "three", "four",   "five",  "six",
                                                          "seven", "eight", "nine", "ten",  "eleven", "twelve"};
    if (n >= 0 && n < static_cast<int>(words.size())) return words[static_cast<std::size_t>(n)];
    return std::to_string(n);
}

}  // namespace dialcoord
