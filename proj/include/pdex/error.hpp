#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdex {

enum class ErrorCode {
  storage_full,
  page_out_of_range,
  page_full,
  record_too_large,
  checksum_mismatch,
  bad_file,
  schema_mismatch,
  row_not_found,
  duplicate_key,
  entry_not_found,
  entry_too_large,
  invalid_bucket_count,
  overflow,
  type_mismatch,
  empty_table,
  missing_stats,
  duplicate_name,
  second_clustered_index,
  blob_key_column,
  invalid_index_def,
  not_found,
  empty_workload,
  header_mismatch,
  parse_error,
  usage,
  locked,
};

std::string_view to_string(ErrorCode code);

// True for errors caused by user input (CLI exit code 1); the rest are internal (exit code 2).
bool is_user_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pdex
