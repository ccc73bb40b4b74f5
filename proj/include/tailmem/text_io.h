#ifndef TAILMEM_TEXT_IO_H_
#define TAILMEM_TEXT_IO_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tailmem {

// Shortest decimal string that parses back to exactly `value`.
std::string FormatDouble(double value);

// Strict parsers; return false on any trailing garbage.
bool ParseDouble(std::string_view text, double& value);
bool ParseInt(std::string_view text, long long& value);

std::vector<std::string_view> SplitFields(std::string_view line, char sep = ',');
std::string_view Trim(std::string_view text);

// Writes `contents` to `path`, creating parent directories.
void WriteTextFile(const std::filesystem::path& path, const std::string& contents);
std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace tailmem

#endif  // TAILMEM_TEXT_IO_H_
