#include <cstdio>

int main() {
  std::puts("monstereo: subcommands not wired up yet");
  return 0;
}
