#ifndef SVYFOSR_TEST_UTIL_HPP
#define SVYFOSR_TEST_UTIL_HPP

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace testutil {

inline std::string temp_path(const std::string& suffix = ".csv") {
  static std::atomic<int> counter{0};
  const auto dir = std::filesystem::temp_directory_path();
  return (dir / ("svyfosr_test_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)) + suffix))
      .string();
}

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& contents) : path(temp_path()) {
    std::ofstream out(path);
    out << contents;
  }
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace testutil

#endif
