#pragma once

#include <map>
#include <set>
#include <string>
#include <string_view>

#include "dialcoord/core.hpp"

namespace dialcoord {

using AspectSet = std::set<int>;

// Annotated dialogue strategy -> promoted aspect ids. Keys are stored
// lower-cased and trimmed; lookups normalize the same way.
class StrategyMap {
public:
    StrategyMap() = default;
    explicit StrategyMap(Task task) : task_(task) {}

    void add(std::string_view strategy, int aspect_id);

    // Unknown strategies map to {} and log a warning.
    AspectSet lookup(std::string_view strategy) const;
    AspectSet lookup_all(const std::vector<std::string>& strategies) const;

    const std::map<std::string, AspectSet>& entries() const noexcept { return entries_; }
    Task task() const noexcept { return task_; }

    // The mapping tables for the two shipped tasks.
    static StrategyMap builtin(Task task);

private:
    Task task_ = Task::esc;
    std::map<std::string, AspectSet> entries_;
};

AspectSet strategy_to_aspects(std::string_view strategy, const StrategyMap& map);

}  // namespace dialcoord
