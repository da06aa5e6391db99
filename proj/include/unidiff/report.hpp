#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace unidiff {

/// One checked quantity. A check passes when `value <= threshold`.
struct ReportEntry {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    bool pass = true;
    /// Informational entries are recorded but do not affect `Report::passed`.
    bool gating = true;
    /// Optional per-step or per-checkpoint values backing `value`.
    std::vector<double> series;
};

/// Residual and inequality-slack record of one certification.
struct Report {
    std::string name;
    /// "ok", or "hypotheses unchecked" when the data violate the assumptions a check relies on.
    std::string status = "ok";
    std::vector<ReportEntry> entries;
    std::vector<std::string> notes;

    ReportEntry& add(std::string entry_name, double value, double threshold, bool gating = true) {
        entries.push_back({std::move(entry_name), value, threshold, value <= threshold, gating, {}});
        return entries.back();
    }

    bool passed() const {
        return std::all_of(entries.begin(), entries.end(),
                           [](const ReportEntry& e) { return e.pass || !e.gating; });
    }

    const ReportEntry* find(const std::string& entry_name) const {
        for (const auto& e : entries) {
            if (e.name == entry_name) {
                return &e;
            }
        }
        return nullptr;
    }

    double value(const std::string& entry_name) const {
        const ReportEntry* e = find(entry_name);
        if (!e) {
            throw std::out_of_range("report '" + name + "' has no entry '" + entry_name + "'");
        }
        return e->value;
    }
};

} // namespace unidiff
