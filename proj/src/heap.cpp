#include "pdex/heap.hpp"

#include "pdex/error.hpp"

namespace pdex {

namespace {

constexpr char kRow = 0;
constexpr char kStub = 1;
constexpr char kRelocated = 2;
constexpr char kShortRow = 3;  // flag + length u8 + row + padding
constexpr std::size_t kMinRecord = 7;

void put_rid(std::string& out, Rid rid) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((rid.page.page_number >> (8 * i)) & 0xFF));
  out.push_back(static_cast<char>(rid.slot & 0xFF));
  out.push_back(static_cast<char>(rid.slot >> 8));
}

Rid get_rid(std::string_view in) {
  std::uint32_t page = 0;
  for (int i = 3; i >= 0; --i) page = (page << 8) | static_cast<unsigned char>(in[i]);
  auto slot = static_cast<std::uint16_t>(static_cast<unsigned char>(in[4]) |
                                         (static_cast<unsigned char>(in[5]) << 8));
  return Rid{page_id(page), slot};
}

std::string row_record(std::string_view row) {
  if (row.size() + 1 >= kMinRecord) {
    std::string rec(1, kRow);
    rec += row;
    return rec;
  }
  std::string rec(1, kShortRow);
  rec.push_back(static_cast<char>(row.size()));
  rec += row;
  rec.resize(kMinRecord, '\0');
  return rec;
}

bool is_row(std::string_view rec) { return rec[0] == kRow || rec[0] == kShortRow; }

std::string_view row_bytes(std::string_view rec) {
  if (rec[0] == kShortRow) return rec.substr(2, static_cast<unsigned char>(rec[1]));
  return rec.substr(1);
}

std::string stub_record(Rid target) {
  std::string rec(1, kStub);
  put_rid(rec, target);
  return rec;
}

std::string relocated_record(Rid home, std::string_view row) {
  std::string rec(1, kRelocated);
  put_rid(rec, home);
  rec += row;
  return rec;
}

[[noreturn]] void not_found(Rid rid) {
  throw Error(ErrorCode::row_not_found,
              "rid " + std::to_string(rid.page.page_number) + ":" + std::to_string(rid.slot));
}

}  // namespace

std::string encode_rid(Rid rid) {
  std::string out;
  put_rid(out, rid);
  return out;
}

Rid decode_rid(std::string_view bytes) {
  if (bytes.size() != 6) throw Error(ErrorCode::bad_file, "rid locator must be 6 bytes");
  return get_rid(bytes);
}

HeapFile::HeapFile(Pager& pager, std::vector<std::uint32_t> pages, std::vector<std::uint32_t> spare)
    : pager_(pager), pages_(std::move(pages)), spare_(std::move(spare)), free_(pages_.size(), 0) {
  for (std::size_t i = 0; i < pages_.size(); ++i) position_[pages_[i]] = i;
}

void HeapFile::load() {
  forwarded_ = 0;
  for (std::size_t i = 0; i < pages_.size(); ++i) {
    Page page = pager_.read_page(page_id(pages_[i]));
    free_[i] = static_cast<std::uint16_t>(page.free_space());
    for (std::uint16_t s = 0; s < page.slot_count(); ++s) {
      auto rec = page.record(s);
      if (!rec.empty() && rec[0] == kStub) ++forwarded_;
    }
  }
}

void HeapFile::note_free(const Page& page) {
  auto it = position_.find(page.id().page_number);
  if (it != position_.end()) free_[it->second] = static_cast<std::uint16_t>(page.free_space());
}

std::uint32_t HeapFile::add_page() {
  std::uint32_t number;
  if (!spare_.empty()) {
    number = spare_.front();
    spare_.erase(spare_.begin());
    Page fresh(page_id(number), PageKind::heap);
    pager_.write_page(fresh);
  } else {
    number = pager_.allocate_page(PageKind::heap).page_number;
  }
  position_[number] = pages_.size();
  pages_.push_back(number);
  free_.push_back(static_cast<std::uint16_t>(kPageBodySize));
  return number;
}

std::size_t HeapFile::find_page_with_room(std::size_t record_size, std::uint32_t exclude) {
  const std::size_t need = record_size + kSlotSize;
  for (std::size_t i = 0; i < pages_.size(); ++i) {
    if (free_[i] >= need && pages_[i] != exclude) return i;
  }
  add_page();
  return pages_.size() - 1;
}

Rid HeapFile::insert(std::string_view row) {
  if (row.size() > kMaxRowSize) {
    throw Error(ErrorCode::record_too_large, "row of " + std::to_string(row.size()) + " bytes exceeds " +
                                                 std::to_string(kMaxRowSize));
  }
  std::string rec = row_record(row);
  std::size_t idx = find_page_with_room(rec.size(), UINT32_MAX);
  Page page = pager_.read_page(page_id(pages_[idx]));
  auto slot = page.slot_insert(rec);
  pager_.write_page(page);
  free_[idx] = static_cast<std::uint16_t>(page.free_space());
  return Rid{page.id(), slot};
}

std::string HeapFile::fetch(Rid rid) {
  Page page = pager_.read_page(rid.page);
  auto rec = page.record(rid.slot);
  if (rec.empty() || rec[0] == kRelocated) not_found(rid);
  if (is_row(rec)) return std::string(row_bytes(rec));
  Rid target = get_rid(rec.substr(1));
  Page other = pager_.read_page(target.page);
  auto moved = other.record(target.slot);
  if (moved.empty() || moved[0] != kRelocated) throw Error(ErrorCode::bad_file, "dangling forwarding stub");
  return std::string(moved.substr(7));
}

bool HeapFile::contains(Rid rid) {
  if (position_.find(rid.page.page_number) == position_.end()) return false;
  Page page = pager_.read_page(rid.page);
  auto rec = page.record(rid.slot);
  return !rec.empty() && rec[0] != kRelocated;
}

void HeapFile::update(Rid rid, std::string_view row) {
  if (row.size() > kMaxRowSize) throw Error(ErrorCode::record_too_large, "row exceeds heap row limit");
  if (position_.find(rid.page.page_number) == position_.end()) not_found(rid);
  Page home = pager_.read_page(rid.page);
  auto rec = home.record(rid.slot);
  if (rec.empty() || rec[0] == kRelocated) not_found(rid);

  if (is_row(rec)) {
    if (home.slot_update(rid.slot, row_record(row))) {
      pager_.write_page(home);
      note_free(home);
      return;
    }
    std::string moved = relocated_record(rid, row);
    std::size_t idx = find_page_with_room(moved.size(), rid.page.page_number);
    Page dest = pager_.read_page(page_id(pages_[idx]));
    auto slot = dest.slot_insert(moved);
    pager_.write_page(dest);
    note_free(dest);
    home.slot_update(rid.slot, stub_record(Rid{dest.id(), slot}));
    pager_.write_page(home);
    note_free(home);
    ++forwarded_;
    return;
  }

  // Already forwarded: update at the target, move home, or re-point the stub.
  Rid target = get_rid(rec.substr(1));
  Page cur = pager_.read_page(target.page);
  std::string moved = relocated_record(rid, row);
  if (cur.slot_update(target.slot, moved)) {
    pager_.write_page(cur);
    note_free(cur);
    return;
  }
  if (home.slot_update(rid.slot, row_record(row))) {
    pager_.write_page(home);
    note_free(home);
    cur.slot_delete(target.slot);
    pager_.write_page(cur);
    --forwarded_;
    return;
  }
  cur.slot_delete(target.slot);
  pager_.write_page(cur);
  std::size_t idx = find_page_with_room(moved.size(), target.page.page_number);
  Page dest = pager_.read_page(page_id(pages_[idx]));
  auto slot = dest.slot_insert(moved);
  pager_.write_page(dest);
  note_free(dest);
  home.slot_update(rid.slot, stub_record(Rid{dest.id(), slot}));
  pager_.write_page(home);
}

void HeapFile::erase(Rid rid) {
  if (position_.find(rid.page.page_number) == position_.end()) not_found(rid);
  Page home = pager_.read_page(rid.page);
  auto rec = home.record(rid.slot);
  if (rec.empty() || rec[0] == kRelocated) not_found(rid);
  if (rec[0] == kStub) {
    Rid target = get_rid(rec.substr(1));
    Page other = pager_.read_page(target.page);
    other.slot_delete(target.slot);
    pager_.write_page(other);
    --forwarded_;
  }
  home.slot_delete(rid.slot);
  pager_.write_page(home);
}

void HeapFile::scan(const std::function<void(Rid, std::string_view)>& visit) {
  for (std::uint32_t number : pages_) {
    Page page = pager_.read_page(page_id(number));
    for (std::uint16_t s = 0; s < page.slot_count(); ++s) {
      auto rec = page.record(s);
      if (rec.empty()) continue;
      if (is_row(rec)) {
        visit(Rid{page.id(), s}, row_bytes(rec));
      } else if (rec[0] == kRelocated) {
        visit(get_rid(rec.substr(1, 6)), rec.substr(7));
      }
    }
  }
}

void HeapFile::reset() {
  spare_.insert(spare_.end(), pages_.begin(), pages_.end());
  pages_.clear();
  free_.clear();
  position_.clear();
  forwarded_ = 0;
}

}  // namespace pdex
