package org.geo;

public class Vector2 {
    private final double dx, dy;

    public Vector2(double dx, double dy) {
        this.dx = dx;
        this.dy = dy;
    }

    public Point apply(Point p) {
        return new Point(p.x + dx, p.y + dy);
    }

    public Vector2 scale(double k) {
        return new Vector2(dx * k, dy * k);
    }
}
