// Client-side mirror of the server's caption style contract so corrections
// fail fast in the form instead of round-tripping to a 422.

export const MAX_CAPTION_WORDS = 40;

const LIST_LINE = /^\s*(?:[-*]|\d+\.)\s/;

export function captionViolations(text: string): string[] {
  const violations: string[] = [];
  if (!text.trim()) {
    violations.push("Empty");
    return violations;
  }
  if (text.split(/\s+/).filter(Boolean).length > MAX_CAPTION_WORDS) {
    violations.push("TooLong");
  }
  if (text.split("\n").some((line) => LIST_LINE.test(line))) {
    violations.push("ListFormatting");
  }
  return violations;
}

export function wordCount(text: string): number {
  return text.split(/\s+/).filter(Boolean).length;
}
