#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "arbiter/core.hpp"

namespace arbiter {

/// Named prompt templates with {prompt}/{text_a}/{text_b} placeholders.
/// Ships with built-in defaults; a prompts/ directory of .txt files (one per
/// template, file stem = id) overrides them so prompt text stays editable
/// without code changes.
class PromptStore {
  public:
    /// Store holding the built-in templates.
    static PromptStore builtin();

    /// Overrides/adds templates from every .txt file in `dir`.
    void load_directory(const std::filesystem::path& dir);

    const std::string& get(const std::string& id) const;
    bool has(const std::string& id) const { return templates_.count(id) > 0; }
    void set(const std::string& id, std::string text);

    /// Substitutes {prompt}, {text_a}, {text_b} in a single pass: text
    /// introduced by a substitution is never re-scanned, so response texts
    /// containing literal placeholder syntax cannot inject.
    std::string render(const std::string& id, const PairwiseTask& task) const;

    std::vector<std::string> ids() const;

  private:
    std::map<std::string, std::string> templates_;
};

/// One-pass placeholder substitution over arbitrary template text.
std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values);

}  // namespace arbiter
