#include "pdex/error.hpp"

namespace pdex {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::storage_full: return "storage-full";
    case ErrorCode::page_out_of_range: return "page-out-of-range";
    case ErrorCode::page_full: return "page-full";
    case ErrorCode::record_too_large: return "record-too-large";
    case ErrorCode::checksum_mismatch: return "checksum-mismatch";
    case ErrorCode::bad_file: return "bad-file";
    case ErrorCode::schema_mismatch: return "schema-mismatch";
    case ErrorCode::row_not_found: return "row-not-found";
    case ErrorCode::duplicate_key: return "duplicate-key";
    case ErrorCode::entry_not_found: return "entry-not-found";
    case ErrorCode::entry_too_large: return "entry-too-large";
    case ErrorCode::invalid_bucket_count: return "invalid-bucket-count";
    case ErrorCode::overflow: return "overflow";
    case ErrorCode::type_mismatch: return "type-mismatch";
    case ErrorCode::empty_table: return "empty-table";
    case ErrorCode::missing_stats: return "missing-stats";
    case ErrorCode::duplicate_name: return "duplicate-name";
    case ErrorCode::second_clustered_index: return "second-clustered-index";
    case ErrorCode::blob_key_column: return "blob-key-column";
    case ErrorCode::invalid_index_def: return "invalid-index-def";
    case ErrorCode::not_found: return "not-found";
    case ErrorCode::empty_workload: return "empty-workload";
    case ErrorCode::header_mismatch: return "header-mismatch";
    case ErrorCode::parse_error: return "parse-error";
    case ErrorCode::usage: return "usage";
    case ErrorCode::locked: return "locked";
  }
  return "unknown";
}

bool is_user_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::storage_full:
    case ErrorCode::checksum_mismatch:
    case ErrorCode::missing_stats:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace pdex
