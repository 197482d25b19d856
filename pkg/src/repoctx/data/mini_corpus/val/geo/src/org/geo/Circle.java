package org.geo;

public class Circle extends Shape {
    private final Point center;
    private final double radius;

    public Circle(Point center, double radius) {
        super("circle");
        this.center = center;
        this.radius = radius;
    }

    @Override
    public double area() {
        return Math.PI * radius * radius;
    }

    public boolean contains(Point p) {
        return center.distanceTo(p) <= radius;
    }
}
