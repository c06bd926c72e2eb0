// Keyboard map: the three decisions plus list navigation and playback are
// all reachable without a pointer. Keys are inert while the correction
// field has focus (except Escape, which leaves it).

export type KeyAction =
  | "accept"
  | "correct"
  | "reject"
  | "next"
  | "prev"
  | "play"
  | "escape"
  | null;

export function actionForKey(key: string, inTextField: boolean): KeyAction {
  if (inTextField) {
    return key === "Escape" ? "escape" : null;
  }
  switch (key) {
    case "a":
    case "A":
      return "accept";
    case "c":
    case "C":
      return "correct";
    case "r":
    case "R":
      return "reject";
    case "j":
    case "ArrowDown":
      return "next";
    case "k":
    case "ArrowUp":
      return "prev";
    case " ":
      return "play";
    case "Escape":
      return "escape";
    default:
      return null;
  }
}
