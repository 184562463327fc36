#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "slidegen/eval.hpp"
#include "slidegen/json_io.hpp"

namespace slidegen {

/// Fills {{name}} placeholders. A placeholder left unfilled is an error so
/// template/call-site drift fails loudly.
inline std::string render_template(const std::string& tmpl,
                                   const std::map<std::string, std::string>& vars) {
  std::string out = tmpl;
  for (const auto& [key, value] : vars) {
    const std::string needle = "{{" + key + "}}";
    std::size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  const auto leftover = out.find("{{");
  if (leftover != std::string::npos) {
    const auto end = out.find("}}", leftover);
    const std::string name =
        end == std::string::npos ? "?" : out.substr(leftover + 2, end - leftover - 2);
    throw AssetError("template placeholder '{{" + name + "}}' was not provided");
  }
  return out;
}

/// Versioned text assets: prompts/*.txt and rubrics/*.txt under the assets
/// directory. All required assets must exist at load time.
class PromptLibrary {
public:
  static PromptLibrary load(const std::filesystem::path& assets_dir) {
    PromptLibrary lib;
    lib.assets_dir_ = assets_dir;
    for (const char* name : {"content_plan", "initial_layout", "visual_review"})
      lib.prompts_[name] = read_required(assets_dir / "prompts" / (std::string(name) + ".txt"));
    for (const JudgeCriterion c : kAllJudgeCriteria)
      lib.rubrics_[c] =
          read_required(assets_dir / "rubrics" / (std::string(to_string(c)) + ".txt"));
    return lib;
  }

  const std::string& prompt(const std::string& name) const {
    const auto it = prompts_.find(name);
    if (it == prompts_.end()) throw AssetError("unknown prompt asset '" + name + "'");
    return it->second;
  }

  const RubricSet& rubrics() const { return rubrics_; }
  const std::filesystem::path& assets_dir() const { return assets_dir_; }

private:
  static std::string read_required(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
      throw AssetError("missing prompt asset: " + path.string());
    return read_text_file(path);
  }

  std::filesystem::path assets_dir_;
  std::map<std::string, std::string> prompts_;
  RubricSet rubrics_;
};

/// Rendered prompt kept for audit; pipelines write these beside outputs.
struct PromptSnapshot {
  std::string name;
  std::string text;
};

}  // namespace slidegen
