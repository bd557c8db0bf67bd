#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace fsap {

/// A versioned prompt template. The file's first line is `version: <tag>`;
/// the rest is the body, with `{name}` placeholders (lowercase letters and '_').
struct PromptTemplate {
    std::string name;
    std::string version;
    std::string body;

    static PromptTemplate parse(std::string name, std::string_view text);

    /// Substitutes every placeholder; values are inserted verbatim.
    /// Throws Error when the body uses a placeholder missing from `values`.
    std::string render(const std::map<std::string, std::string>& values) const;

    std::vector<std::string> placeholders() const;
};

/// Templates of one version, loaded from `<root>/<version>/<name>.txt`.
class TemplateLibrary {
public:
    static constexpr std::string_view kNames[] = {
        "fsap_intraq", "fsap_interq", "rewriter",     "paraphraser",
        "fact_inversion", "liar",     "judge_stance", "judge_detection"};

    static TemplateLibrary load(const std::filesystem::path& root, const std::string& version);

    const PromptTemplate& get(std::string_view name) const;
    const std::string& version() const { return version_; }

private:
    std::string version_;
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

}  // namespace fsap
