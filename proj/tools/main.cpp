#include <cstdio>

int main() {
  std::puts("protoseg: subcommands not wired yet");
  return 1;
}
