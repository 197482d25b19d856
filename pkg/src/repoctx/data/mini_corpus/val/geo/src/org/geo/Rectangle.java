package org.geo;

public class Rectangle extends Shape {
    protected final double width;
    protected final double height;

    public Rectangle(double width, double height) {
        this("rectangle", width, height);
    }

    protected Rectangle(String name, double width, double height) {
        super(name);
        this.width = width;
        this.height = height;
    }

    @Override
    public double area() {
        return width * height;
    }
}
