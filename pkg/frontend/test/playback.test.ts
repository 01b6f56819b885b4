import { describe, expect, it } from 'vitest';

import { PlaybackClock } from '../src/playback';

describe('PlaybackClock', () => {
    it('shows exactly L frames per loop for a length-L trajectory', () => {
        const L = 20;
        const clock = new PlaybackClock(L, 10); // 10 fps -> 100 ms per frame
        const seen = new Set<number>([clock.frame]);
        for (let i = 0; i < L - 1; i++) {
            clock.tick(100);
            seen.add(clock.frame);
        }
        expect(seen.size).toBe(L);
        expect(clock.frame).toBe(L - 1);
        clock.tick(100); // loop-on-end wraps to the first frame
        expect(clock.frame).toBe(0);
    });

    it('frame k always indexes step k (deterministic replay)', () => {
        const clock = new PlaybackClock(5, 10);
        const frames: number[] = [clock.frame];
        for (let i = 0; i < 9; i++) {
            clock.tick(100);
            frames.push(clock.frame);
        }
        expect(frames).toEqual([0, 1, 2, 3, 4, 0, 1, 2, 3, 4]);
    });

    it('accumulates partial ticks without dropping frames', () => {
        const clock = new PlaybackClock(10, 10);
        clock.tick(50);
        expect(clock.frame).toBe(0);
        clock.tick(50);
        expect(clock.frame).toBe(1);
        clock.tick(250); // catches up across multiple frame periods
        expect(clock.frame).toBe(3);
    });

    it('pause stops the clock and toggle resumes it', () => {
        const clock = new PlaybackClock(4, 10);
        clock.toggle();
        clock.tick(1000);
        expect(clock.frame).toBe(0);
        clock.toggle();
        clock.tick(100);
        expect(clock.frame).toBe(1);
    });

    it('speed multiplier scales the frame period', () => {
        const clock = new PlaybackClock(30, 10);
        clock.setSpeed(2);
        clock.tick(100); // 2x speed -> 50 ms per frame
        expect(clock.frame).toBe(2);
    });

    it('rejects empty trajectories and non-positive speeds', () => {
        expect(() => new PlaybackClock(0)).toThrow();
        expect(() => new PlaybackClock(5).setSpeed(0)).toThrow();
    });
});
