#pragma once

// Small hand-written programs shared across test suites.

namespace invscov::fixtures {

// max(x, y) with two branch assignments joined by a phi.
inline constexpr const char* kMax = R"(
program seed=42
entry fn max(x: i64, y: i64) -> i64 {
entry:
  c: u8 = icmp.lt y, x
  br c, then, else
then:
  m1: i64 = add x, 0
  jmp end
else:
  m2: i64 = add y, 0
  jmp end
end:
  m3: i64 = phi [then: m1] [else: m2]
  ret m3
}
)";

// Faults with a bug instruction when input[0] == 0xbd.
inline constexpr const char* kRoadblock = R"(
program seed=7
entry fn main() -> u64 {
entry:
  zero: u64 = const 0
  b0: u8 = input_read zero
  c: u8 = icmp.eq b0, 189
  br c, boom, out
boom:
  bug
  ret 1
out:
  ret 0
}
)";

// Divides a constant by input[0].
inline constexpr const char* kDivByInput = R"(
program seed=9
entry fn main() -> u64 {
entry:
  zero: u64 = const 0
  d: u8 = input_read zero
  hundred: u32 = const 100
  q: u32 = div hundred, d
  r: u64 = cast q
  ret r
}
)";

// Counting loop: sums the first min(len, 8) input bytes.
inline constexpr const char* kSumLoop = R"(
program seed=11
entry fn main() -> u64 {
entry:
  n: u64 = input_len
  eight: u64 = const 8
  small: u8 = icmp.lt n, eight
  br small, use_n, use_8
use_n:
  jmp pre
use_8:
  jmp pre
pre:
  lim: u64 = phi [use_n: n] [use_8: eight]
  zero: u64 = const 0
  jmp head
head:
  i: u64 = phi [pre: zero] [body: inext]
  acc: u64 = phi [pre: zero] [body: accnext]
  again: u8 = icmp.lt i, lim
  br again, body, done
body:
  byte: u8 = input_read i
  wide: u64 = cast byte
  accnext: u64 = add acc, wide
  inext: u64 = add i, 1
  jmp head
done:
  ret acc
}
)";

// Call chain with a runtime helper in the middle; helper faults on zero.
inline constexpr const char* kCallChain = R"(
program seed=13
entry fn main() -> u64 {
entry:
  zero: u64 = const 0
  b: u8 = input_read zero
  w: u64 = cast b
  r: u64 = call rt_scale, w
  ret r
}
fn rt_scale(x: u64) -> u64 {
entry:
  r: u64 = call inner, x
  ret r
}
fn inner(x: u64) -> u64 {
entry:
  c: u8 = icmp.eq x, 0
  br c, boom, out
boom:
  bug
  ret 0
out:
  two: u64 = const 2
  r: u64 = mul x, two
  ret r
}
)";

}  // namespace invscov::fixtures
