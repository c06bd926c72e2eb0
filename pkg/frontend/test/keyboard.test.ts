import { describe, expect, it } from "vitest";

import { actionForKey } from "../src/keyboard.js";

describe("actionForKey", () => {
  it("maps the three decisions", () => {
    expect(actionForKey("a", false)).toBe("accept");
    expect(actionForKey("A", false)).toBe("accept");
    expect(actionForKey("c", false)).toBe("correct");
    expect(actionForKey("r", false)).toBe("reject");
  });

  it("maps navigation and playback", () => {
    expect(actionForKey("j", false)).toBe("next");
    expect(actionForKey("ArrowDown", false)).toBe("next");
    expect(actionForKey("k", false)).toBe("prev");
    expect(actionForKey(" ", false)).toBe("play");
  });

  it("is inert while typing except Escape", () => {
    expect(actionForKey("a", true)).toBeNull();
    expect(actionForKey("r", true)).toBeNull();
    expect(actionForKey("Escape", true)).toBe("escape");
  });

  it("ignores unmapped keys", () => {
    expect(actionForKey("x", false)).toBeNull();
  });
});
