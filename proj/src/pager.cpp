#include "pdex/pager.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <string>

#include "pdex/error.hpp"

namespace pdex {

namespace {

std::string errno_text() { return std::strerror(errno); }

bool full_pwrite(int fd, const std::byte* data, std::size_t n, off_t off) {
  while (n > 0) {
    ssize_t w = ::pwrite(fd, data, n, off);
    if (w <= 0) {
      if (w < 0 && errno == EINTR) continue;
      return false;
    }
    data += w;
    n -= static_cast<std::size_t>(w);
    off += w;
  }
  return true;
}

bool full_pread(int fd, std::byte* data, std::size_t n, off_t off) {
  while (n > 0) {
    ssize_t r = ::pread(fd, data, n, off);
    if (r <= 0) {
      if (r < 0 && errno == EINTR) continue;
      return false;
    }
    data += r;
    n -= static_cast<std::size_t>(r);
    off += r;
  }
  return true;
}

}  // namespace

Pager::Pager(int fd, std::filesystem::path path, std::uint32_t page_count)
    : fd_(fd), path_(std::move(path)), page_count_(page_count) {}

Pager::Pager(Pager&& other) noexcept
    : fd_(other.fd_), path_(std::move(other.path_)), page_count_(other.page_count_), counters_(other.counters_) {
  other.fd_ = -1;
}

Pager& Pager::operator=(Pager&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    path_ = std::move(other.path_);
    page_count_ = other.page_count_;
    counters_ = other.counters_;
    other.fd_ = -1;
  }
  return *this;
}

Pager::~Pager() {
  if (fd_ >= 0) ::close(fd_);
}

Pager Pager::create(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_EXCL, 0644);
  if (fd < 0) throw Error(ErrorCode::bad_file, "cannot create " + path.string() + ": " + errno_text());
  Pager pager(fd, path, 0);
  // Page 0: magic at byte 0; sibling and checksum at the standard offsets.
  Page root;
  std::memcpy(root.bytes().data(), kMagic, sizeof(kMagic));
  root.put_u16(8, 1);  // format version
  root.set_right_sibling(std::nullopt);
  root.seal();
  if (!full_pwrite(fd, root.bytes().data(), kPageSize, 0)) {
    throw Error(ErrorCode::storage_full, "cannot write page 0: " + errno_text());
  }
  pager.page_count_ = 1;
  ++pager.counters_.logical_writes;
  return pager;
}

Pager Pager::open(const std::filesystem::path& path) {
  int fd = ::open(path.c_str(), O_RDWR);
  if (fd < 0) throw Error(ErrorCode::bad_file, "cannot open " + path.string() + ": " + errno_text());
  struct stat st {};
  if (::fstat(fd, &st) != 0 || st.st_size == 0 || st.st_size % static_cast<off_t>(kPageSize) != 0) {
    ::close(fd);
    throw Error(ErrorCode::bad_file, path.string() + " is not a page-aligned database file");
  }
  char magic[sizeof(kMagic)];
  if (::pread(fd, magic, sizeof(magic), 0) != static_cast<ssize_t>(sizeof(magic)) ||
      std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    ::close(fd);
    throw Error(ErrorCode::bad_file, path.string() + " lacks the PDEXv1 magic");
  }
  return Pager(fd, path, static_cast<std::uint32_t>(st.st_size / static_cast<off_t>(kPageSize)));
}

void Pager::check_range(PageId id) const {
  if (id.file_id != kDataFileId || id.page_number >= page_count_) {
    throw Error(ErrorCode::page_out_of_range, "page " + std::to_string(id.file_id) + ":" +
                                                  std::to_string(id.page_number) + " not allocated (" +
                                                  std::to_string(page_count_) + " pages)");
  }
}

PageId Pager::allocate_page(PageKind kind, std::uint8_t level) {
  PageId id = page_id(page_count_);
  Page page(id, kind, level);
  page.seal();
  if (!full_pwrite(fd_, page.bytes().data(), kPageSize, static_cast<off_t>(id.page_number) * kPageSize)) {
    // Leave the file at its previous length.
    [[maybe_unused]] int rc = ::ftruncate(fd_, static_cast<off_t>(page_count_) * kPageSize);
    throw Error(ErrorCode::storage_full, "cannot extend " + path_.string() + ": " + errno_text());
  }
  ++page_count_;
  ++counters_.logical_writes;
  return id;
}

Page Pager::read_page(PageId id) {
  check_range(id);
  Page page;
  if (!full_pread(fd_, page.bytes().data(), kPageSize, static_cast<off_t>(id.page_number) * kPageSize)) {
    throw Error(ErrorCode::bad_file, "short read of page " + std::to_string(id.page_number));
  }
  ++counters_.logical_reads;
  if (page.stored_checksum() != page.compute_checksum()) {
    throw Error(ErrorCode::checksum_mismatch, "page " + std::to_string(id.page_number));
  }
  return page;
}

void Pager::write_page(Page& page) {
  // Page 0 carries magic where other pages carry their id.
  PageId id = page.id();
  bool is_root = std::memcmp(page.bytes().data(), kMagic, sizeof(kMagic)) == 0;
  if (is_root) id = page_id(0);
  check_range(id);
  page.seal();
  if (!full_pwrite(fd_, page.bytes().data(), kPageSize, static_cast<off_t>(id.page_number) * kPageSize)) {
    throw Error(ErrorCode::storage_full, "cannot write page " + std::to_string(id.page_number) + ": " + errno_text());
  }
  ++counters_.logical_writes;
}

}  // namespace pdex
